#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "got/datasets.hpp"
#include "got/functionals.hpp"
#include "got/networks.hpp"
#include "got/optim.hpp"

namespace got {

struct TrainConfig {
  double lr_T = 1e-4;
  double lr_v = 1e-4;
  std::size_t K_T = 10;
  std::size_t K_B = 32;
  std::size_t K_X = 2;
  std::size_t K_Y = 2;
  std::size_t K_Z = 2;
  std::size_t total_v_iters = 10000;
  std::size_t v_batch = 0;  // rows of X and of Y per potential step; 0: K_B*K_X and K_B*K_Y
  std::size_t latent_dim = 2;  // 0: deterministic map, K_Z is then forced to 1
  FunctionalKind functional;   // gamma_reg lives here
  std::size_t hidden_dim = 128;
  std::size_t hidden_layers = 2;
  std::size_t v_hidden_dim = 128;
  std::size_t v_hidden_layers = 2;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;        // 0: only at the end
  std::size_t checkpoint_every = 0;  // 0: only at the end (needs an output dir)

  void validate() const;
  // K_Z actually used: 1 for a deterministic map.
  std::size_t effective_k_z() const { return latent_dim == 0 ? 1 : K_Z; }
};

struct TrainRecord {
  std::size_t iter = 0;
  double L_v = 0.0;
  double L_T = 0.0;
  double accuracy = 0.0;
  double energy_to_target = 0.0;
};

struct TrainReport {
  std::vector<TrainRecord> series;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::string> diagnostics;

  void write_csv(const std::filesystem::path& path) const;
};

struct Models {
  TransportMap T;
  Potential v;
  AdamState opt_T;
  AdamState opt_v;

  static Models init(const TrainConfig& cfg, std::size_t data_dim);
};

// Sampled batches for one outer iteration. X and Y are drawn uniformly from
// the source and target train splits (labeled or not); Z holds K_Z latent rows
// per X row.
struct UnlabeledBatch {
  Tensor X;
  Tensor Z;
  Tensor Y;
};

// Loss graphs shared by the steps below and by the gradient checker.
// L_v = mean v(images) - mean v(Y).
Var potential_loss(Graph& g, Potential& v, const Tensor& images, const Tensor& Y,
                   bool trainable);
// F(X, T(X,Z)) - mean v(T(x,z)) with v frozen.
Var map_loss_general(Graph& g, TransportMap& T, Potential& v, const FunctionalKind& functional,
                     const Tensor& X, const Tensor* Z, std::size_t k_z, bool trainable);
// Class-guided estimate over stacked class batches + gamma_reg * R_l - mean v(T(x,z)).
Var map_loss_class_guided(Graph& g, TransportMap& T, Potential& v,
                          const std::vector<ClassBatch>& batches, double gamma_reg,
                          bool trainable);

// L_v = mean v(T(x,z)) - mean v(y) with T frozen. One Adam step on omega
// descends L_v, i.e. ascends the maximin objective in v. Returns L_v before
// the step.
double potential_step(Potential& v, AdamState& opt_v, TransportMap& T, const Tensor& X,
                      const Tensor* Z, std::size_t k_z, const Tensor& Y);

// L_T = F(X, T(X,Z)) - mean v(T(x,z)) with v frozen; one Adam step on theta.
double map_step_general(TransportMap& T, AdamState& opt_T, Potential& v,
                        const FunctionalKind& functional, const Tensor& X, const Tensor* Z,
                        std::size_t k_z);

// L_T = mean over class batches of [class-guided estimate + gamma_reg * R_l]
// - mean v(T(x,z)); one Adam step on theta.
double map_step_class_guided(TransportMap& T, AdamState& opt_T, Potential& v,
                             const std::vector<ClassBatch>& batches, double gamma_reg);

// Value of L_T without stepping (used by diagnostics).
double map_objective(TransportMap& T, Potential& v, const FunctionalKind& functional,
                     const std::vector<ClassBatch>& class_batches, const Tensor& X,
                     const Tensor* Z, std::size_t k_z);

/// Draws the mini-batches of both algorithms from a dataset.
class BatchSampler {
 public:
  BatchSampler(const LabeledDataset& ds, const TrainConfig& cfg);

  UnlabeledBatch unlabeled(Rng& rng) const;
  // Classes are drawn with probabilities alpha; targets only from the
  // labeled subset.
  std::vector<ClassBatch> class_batches(Rng& rng) const;
  Tensor source_batch(Rng& rng, std::size_t n) const;
  Tensor latents(Rng& rng, std::size_t rows) const;

  // Every target row index ever used for a class batch goes through here.
  const std::vector<std::vector<std::size_t>>& labeled_rows() const { return labeled_; }

 private:
  const LabeledDataset* ds_;
  TrainConfig cfg_;
  std::vector<std::size_t> src_train_;
  std::vector<std::size_t> tgt_train_;
  std::vector<std::vector<std::size_t>> src_by_class_;
  std::vector<std::vector<std::size_t>> labeled_;
  std::vector<double> alpha_;
};

// Seed of the RNG used for outer iteration `iter`.
std::uint64_t batch_seed(std::uint64_t seed, std::size_t iter);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;
  std::string checkpoint_metadata = "{}";  // JSON object stored in every checkpoint
  // Called at eval points; returns (accuracy, energy_to_target).
  std::function<std::pair<double, double>(const TransportMap&)> evaluator;
  // Called after every outer iteration with (iter, L_v, L_T).
  std::function<void(std::size_t, double, double)> progress;
};

struct TrainResult {
  Models models;
  TrainReport report;
};

TrainResult train(const TrainConfig& cfg, const LabeledDataset& data,
                  const TrainOptions& options = {});

}  // namespace got
