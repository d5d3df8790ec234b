#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "got/tensor.hpp"

namespace got {

inline constexpr int kUnlabeled = -1;

/// What generated a dataset; the oracle classifiers read it.
struct DatasetGeometry {
  std::string kind = "none";  // moons | gaussian_grid | gaussian_mixture | csv | none
  // moons: target = source shape rotated by rotation_deg about center.
  double rotation_deg = 0.0;
  double center_x = 0.5;
  double center_y = 0.25;
  // gaussian mixtures: per-class component means, [classes, D] row-major.
  std::vector<double> source_means;
  std::vector<double> target_means;
  double sigma = 0.0;
};

/// Labeled source sample of P = sum a_n P_n and partially labeled target
/// sample of Q = sum b_n Q_n, each with a train/test mask.
///
/// Target train points outside the labeled subset carry kUnlabeled. Target
/// test points keep their true labels for evaluation.
struct LabeledDataset {
  std::size_t dim = 2;
  std::size_t num_classes = 0;
  Tensor source;  // [N, D]
  std::vector<int> source_labels;
  std::vector<bool> source_train;
  Tensor target;  // [M, D]
  std::vector<int> target_labels;
  std::vector<bool> target_train;
  std::vector<double> alpha;
  std::vector<double> beta;
  DatasetGeometry geometry;

  void validate() const;

  // Row indices filtered by split and (optionally) class; cls < 0 means any.
  std::vector<std::size_t> source_rows(bool train, int cls = -1) const;
  std::vector<std::size_t> target_rows(bool train, int cls = -1) const;
  std::vector<std::size_t> labeled_target_rows(int cls) const;
};

struct MoonsOptions {
  std::size_t n_train_per_class = 500;
  std::size_t n_test_per_class = 150;
  double noise_sigma = 0.1;
  double rotation_deg = 90.0;
  std::uint64_t seed = 0;
};

// Outer arc (cos t, sin t) is class 0, inner arc (1 - cos t, 0.5 - sin t) is
// class 1, t ~ U[0, pi]. The target is a fresh draw rotated about the
// centroid (0.5, 0.25) of the noiseless shape.
LabeledDataset make_two_moons(const MoonsOptions& options);

struct GridOptions {
  std::size_t n_components = 16;
  std::size_t n_train_per_comp = 1000;
  std::size_t n_test_per_comp = 200;
  double grid_spacing = 1.0;
  double sigma = 0.1;
  std::uint64_t seed = 0;
};

// Source components on a centred sqrt(n) x sqrt(n) grid; the target places
// each class at its source center rotated by 90 degrees about the origin.
LabeledDataset make_gaussian_grid(const GridOptions& options);

// Isotropic Gaussian components, one class per component. Means are
// [classes, D] row-major.
LabeledDataset make_gaussian_mixture(const std::vector<double>& source_means,
                                     const std::vector<double>& target_means,
                                     std::size_t dim, std::size_t n_train_per_comp,
                                     std::size_t n_test_per_comp, double sigma,
                                     std::uint64_t seed);

// Keeps exactly k labeled target train points per class, chosen uniformly.
LabeledDataset partial_labeling(const LabeledDataset& ds, std::size_t k_per_class,
                                std::uint64_t seed);

// Subsamples every split so class frequencies match alpha (source) and beta
// (target) to within one point per class. Classes with weight 0 are removed.
// Must run before partial_labeling.
LabeledDataset set_class_weights(const LabeledDataset& ds, const std::vector<double>& alpha,
                                 const std::vector<double>& beta, std::uint64_t seed);

// Class frequencies of the non-negative labels among `labels`.
std::vector<double> estimate_class_weights(const std::vector<int>& labels,
                                           std::size_t num_classes);

struct CsvOptions {
  std::string label_column = "label";
  std::string split_column = "split";
};

struct CsvLoadReport {
  std::size_t source_rows = 0;
  std::size_t target_rows = 0;
  std::size_t source_rejected = 0;
  std::size_t target_rejected = 0;
};

// Writes source.csv and target.csv with columns f0..f{D-1}, label, split.
void save_csv(const LabeledDataset& ds, const std::filesystem::path& dir);

// Feature columns are every column other than the label and split columns,
// in file order. Rows with NaN features are dropped and counted.
LabeledDataset load_csv_labeled(const std::filesystem::path& source_csv,
                                const std::filesystem::path& target_csv,
                                const CsvOptions& options = {},
                                CsvLoadReport* report = nullptr);

}  // namespace got
