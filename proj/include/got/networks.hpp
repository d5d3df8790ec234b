#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "got/autodiff.hpp"
#include "got/tensor.hpp"

namespace got {

using Rng = std::mt19937_64;

struct MlpConfig {
  std::size_t in_dim = 2;
  std::size_t hidden_dim = 128;
  std::size_t hidden_layers = 2;
  std::size_t out_dim = 2;

  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

/// Fully connected ReLU network: hidden_layers x (Linear -> ReLU) -> Linear.
class Mlp {
 public:
  Mlp() = default;
  // He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  Mlp(const MlpConfig& config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }

  // With `trainable` the parameters are bound as gradient sinks, otherwise
  // they enter the graph read-only.
  Var forward(Var x, bool trainable);

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<Tensor*> parameter_ptrs();

 private:
  MlpConfig config_;
  std::vector<Tensor> params_;  // W0, b0, W1, b1, ...
};

/// Stochastic map T(x, z) realized as an MLP over the concatenation [x; z].
/// latent_dim == 0 gives the deterministic map T(x).
class TransportMap {
 public:
  TransportMap() = default;
  TransportMap(std::size_t data_dim, std::size_t latent_dim, std::size_t hidden_dim,
               std::size_t hidden_layers, std::uint64_t seed);
  TransportMap(std::size_t data_dim, std::size_t latent_dim, Mlp mlp);

  std::size_t data_dim() const { return data_dim_; }
  std::size_t latent_dim() const { return latent_dim_; }
  bool stochastic() const { return latent_dim_ > 0; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

  // z must be given iff latent_dim > 0, with one latent row per x row.
  Var forward(Var x, std::optional<Var> z, bool trainable);
  Tensor apply(const Tensor& x, const Tensor* z = nullptr) const;

 private:
  std::size_t data_dim_ = 0;
  std::size_t latent_dim_ = 0;
  Mlp mlp_;
};

/// Scalar potential v(y).
class Potential {
 public:
  Potential() = default;
  Potential(std::size_t data_dim, std::size_t hidden_dim, std::size_t hidden_layers,
            std::uint64_t seed);
  explicit Potential(Mlp mlp);

  std::size_t data_dim() const { return mlp_.config().in_dim; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

  Var forward(Var y, bool trainable);
  Tensor apply(const Tensor& y) const;

 private:
  Mlp mlp_;
};

/// Draws from the standard Gaussian N(0, I_Z).
class LatentSampler {
 public:
  explicit LatentSampler(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const { return dim_; }
  Tensor sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t dim_;
};

// Checkpoints: one line of JSON (version, configs, tensor manifest with
// shapes and byte offsets into the payload) terminated by '\n', followed by
// the raw little-endian f64 payload in manifest order.
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointExtension = ".gotckpt";

struct Checkpoint {
  TransportMap transport;
  Potential potential;
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const TransportMap& transport,
                     const Potential& potential, const std::string& metadata_json = "{}");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace got
