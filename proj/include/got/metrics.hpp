#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "got/datasets.hpp"
#include "got/networks.hpp"
#include "got/tensor.hpp"
#include "got/trainer.hpp"

namespace got {

enum class OracleKind { Moons, GaussianGrid, NearestLabeled };

OracleKind parse_oracle_kind(const std::string& name);
std::string oracle_kind_name(OracleKind kind);
// Natural classifier for a dataset's geometry.
OracleKind default_oracle(const LabeledDataset& ds);

// Ties go to the lowest class index.
std::vector<int> oracle_classify(const Tensor& points, const LabeledDataset& ds,
                                 OracleKind kind);

// Plain (no autodiff) U-statistic energy distance, as in the training estimator.
double energy_distance_sq(const Tensor& A, const Tensor& B);

struct EvalReport {
  double accuracy = 0.0;             // over all (x, z) pairs
  double accuracy_first_draw = 0.0;  // one latent draw per input
  std::vector<std::vector<std::size_t>> confusion;  // [source class][predicted class]
  double energy_overall = 0.0;
  std::vector<double> energy_per_class;  // NaN when a class has < 2 points on a side
  std::optional<double> eps1_estimate;
  std::optional<double> eps1_std;
  std::size_t n_latent_draws = 1;

  void write_csv(const std::filesystem::path& path) const;
  std::string summary_json() const;
};

struct EvalOptions {
  std::size_t n_latent_draws = 4;  // forced to 1 for deterministic maps
  std::uint64_t seed = 0;
  std::optional<OracleKind> oracle;
};

EvalReport evaluate(const TransportMap& T, const LabeledDataset& ds,
                    const EvalOptions& options = {});

// Images of every test source point, n_draws per point for a stochastic map
// (x-major order), with the matching source labels.
std::pair<Tensor, std::vector<int>> map_test_points(const TransportMap& T,
                                                    const LabeledDataset& ds,
                                                    std::size_t n_draws, std::uint64_t seed);

struct Eps1Estimate {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_batch;
};

// Trains a fresh map against the frozen potential for `budget` map steps and
// reports L(v, T_hat) - L(v, T') over 5 fixed evaluation batches. Upper-biased
// since T' is only approximately optimal.
Eps1Estimate estimate_eps1(Potential& v_hat, TransportMap& T_hat, const LabeledDataset& ds,
                           const TrainConfig& cfg, std::size_t budget, std::uint64_t seed);

struct ScatterPanel {
  std::string title;
  const Tensor* points;
  const std::vector<int>* labels;
};

// Dependency-free SVG with one scatter panel per entry, colored by class.
void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<ScatterPanel>& panels);

}  // namespace got
