#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "got/datasets.hpp"
#include "got/errors.hpp"

using namespace got;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::vector<double> centroid(const Tensor& pts, const std::vector<int>& labels, int cls) {
  double x = 0, y = 0, n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != cls) continue;
    x += pts.at(i, 0);
    y += pts.at(i, 1);
    n += 1;
  }
  return {x / n, y / n};
}

}  // namespace

TEST(Moons, DefaultCounts) {
  LabeledDataset ds = make_two_moons({});
  EXPECT_EQ(ds.source.rows(), 1300u);
  EXPECT_EQ(ds.target.rows(), 1300u);
  EXPECT_EQ(ds.source_rows(true, 0).size(), 500u);
  EXPECT_EQ(ds.source_rows(false, 1).size(), 150u);
  EXPECT_EQ(ds.target_rows(true, 1).size(), 500u);
  EXPECT_EQ(ds.target_rows(false, 0).size(), 150u);
  EXPECT_NO_THROW(ds.validate());
}

TEST(Moons, SameSeedIsBitwiseIdentical) {
  LabeledDataset a = make_two_moons({.seed = 3}), b = make_two_moons({.seed = 3}),
                 c = make_two_moons({.seed = 4});
  EXPECT_EQ(a.source.buffer(), b.source.buffer());
  EXPECT_EQ(a.target.buffer(), b.target.buffer());
  EXPECT_NE(a.source.buffer(), c.source.buffer());
}

TEST(Moons, ZeroRotationIsAFreshDrawOfTheSource) {
  MoonsOptions o;
  o.rotation_deg = 0;
  o.n_train_per_class = 3000;
  LabeledDataset ds = make_two_moons(o);
  EXPECT_NE(ds.source.buffer(), ds.target.buffer());
  // Noise-free arc means: outer (0, 2/pi), inner (1, 0.5 - 2/pi).
  const double band = 4 * 0.8 / std::sqrt(3150.0);
  for (int cls = 0; cls < 2; ++cls) {
    auto s = centroid(ds.source, ds.source_labels, cls);
    auto t = centroid(ds.target, ds.target_labels, cls);
    EXPECT_NEAR(s[0], t[0], 2 * band);
    EXPECT_NEAR(s[1], t[1], 2 * band);
  }
  auto outer = centroid(ds.source, ds.source_labels, 0);
  EXPECT_NEAR(outer[0], 0.0, band);
  EXPECT_NEAR(outer[1], 2 / std::numbers::pi, band);
}

TEST(Moons, RotatedCentroids) {
  MoonsOptions o;
  o.n_train_per_class = 4000;
  LabeledDataset ds = make_two_moons(o);
  const double n = 4150;
  for (int cls = 0; cls < 2; ++cls) {
    auto s = centroid(ds.source, ds.source_labels, cls);
    auto t = centroid(ds.target, ds.target_labels, cls);
    // Rotate the source centroid by 90 degrees about (0.5, 0.25).
    const double rx = 0.5 - (s[1] - 0.25), ry = 0.25 + (s[0] - 0.5);
    // Per-axis spread is below 0.8 for both arcs; two independent samples.
    const double band = 3 * 0.8 * std::sqrt(2.0 / n);
    EXPECT_NEAR(t[0], rx, band);
    EXPECT_NEAR(t[1], ry, band);
  }
}

TEST(Grid, CountsAndCenters) {
  GridOptions o;
  o.n_train_per_comp = 300;
  o.n_test_per_comp = 100;
  LabeledDataset ds = make_gaussian_grid(o);
  EXPECT_EQ(ds.num_classes, 16u);
  EXPECT_EQ(ds.source.rows(), 16u * 400u);
  const double band = 3 * o.sigma / std::sqrt(400.0);
  for (int k = 0; k < 16; ++k) {
    auto s = centroid(ds.source, ds.source_labels, k);
    auto t = centroid(ds.target, ds.target_labels, k);
    const double sx = (k % 4 - 1.5) * o.grid_spacing, sy = (k / 4 - 1.5) * o.grid_spacing;
    EXPECT_NEAR(s[0], sx, band);
    EXPECT_NEAR(s[1], sy, band);
    EXPECT_NEAR(t[0], -sy, band);
    EXPECT_NEAR(t[1], sx, band);
    EXPECT_DOUBLE_EQ(ds.geometry.source_means[2 * k], sx);
  }
}

TEST(Grid, RejectsNonSquareCount) {
  GridOptions o;
  o.n_components = 15;
  EXPECT_THROW(make_gaussian_grid(o), PreconditionError);
}

TEST(Grid, ZeroSigmaCollapsesToMeans) {
  GridOptions o;
  o.sigma = 0;
  o.n_train_per_comp = 3;
  o.n_test_per_comp = 2;
  LabeledDataset ds = make_gaussian_grid(o);
  for (std::size_t i = 0; i < ds.target.rows(); ++i) {
    const int k = ds.target_labels[i];
    EXPECT_EQ(ds.target.at(i, 0), ds.geometry.target_means[2 * k]);
    EXPECT_EQ(ds.target.at(i, 1), ds.geometry.target_means[2 * k + 1]);
  }
}

TEST(PartialLabeling, ExactPartition) {
  LabeledDataset full = make_two_moons({.n_train_per_class = 40, .n_test_per_class = 10});
  LabeledDataset ds = partial_labeling(full, 10, 5);
  for (int cls = 0; cls < 2; ++cls) {
    auto lab = ds.labeled_target_rows(cls);
    EXPECT_EQ(lab.size(), 10u);
    for (std::size_t r : lab) EXPECT_TRUE(ds.target_train[r]);
  }
  std::size_t unlabeled = 0, labeled = 0;
  for (std::size_t r = 0; r < ds.target.rows(); ++r) {
    if (!ds.target_train[r]) {
      EXPECT_EQ(ds.target_labels[r], full.target_labels[r]);
      continue;
    }
    if (ds.target_labels[r] == kUnlabeled) {
      ++unlabeled;
    } else {
      ++labeled;
      EXPECT_EQ(ds.target_labels[r], full.target_labels[r]);
    }
  }
  EXPECT_EQ(labeled + unlabeled, 80u);
  EXPECT_EQ(labeled, 20u);
  EXPECT_EQ(ds.target.buffer(), full.target.buffer());
}

TEST(PartialLabeling, FullClassKeepsEverything) {
  LabeledDataset full = make_two_moons({.n_train_per_class = 15, .n_test_per_class = 5});
  LabeledDataset ds = partial_labeling(full, 15, 1);
  EXPECT_EQ(ds.target_labels, full.target_labels);
  EXPECT_THROW(partial_labeling(full, 16, 1), PreconditionError);
}

TEST(ClassWeights, UniformKeepsBalancedData) {
  LabeledDataset full = make_two_moons({.n_train_per_class = 30, .n_test_per_class = 10});
  LabeledDataset ds = set_class_weights(full, {0.5, 0.5}, {0.5, 0.5}, 1);
  EXPECT_EQ(ds.source.rows(), full.source.rows());
  EXPECT_EQ(ds.target.rows(), full.target.rows());
}

TEST(ClassWeights, ProportionsAndRemoval) {
  GridOptions o;
  o.n_components = 4;
  o.n_train_per_comp = 100;
  o.n_test_per_comp = 20;
  LabeledDataset full = make_gaussian_grid(o);
  LabeledDataset ds = set_class_weights(full, {0.5, 0.3, 0.2, 0.0}, {0.25, 0.25, 0.25, 0.25}, 2);
  auto counts = [&](bool train) {
    std::vector<double> c(4, 0);
    for (std::size_t i = 0; i < ds.source_labels.size(); ++i) {
      if (ds.source_train[i] == train) c[ds.source_labels[i]] += 1;
    }
    return c;
  };
  for (bool split : {true, false}) {
    auto c = counts(split);
    const double total = c[0] + c[1] + c[2] + c[3];
    EXPECT_EQ(c[3], 0.0);
    EXPECT_NEAR(c[0], 0.5 * total, 1.0);
    EXPECT_NEAR(c[1], 0.3 * total, 1.0);
    EXPECT_NEAR(c[2], 0.2 * total, 1.0);
  }
  EXPECT_EQ(ds.alpha[3], 0.0);
  EXPECT_THROW(set_class_weights(full, {0.5, 0.5}, {0.5, 0.5}, 0), PreconditionError);
  LabeledDataset lab = partial_labeling(full, 3, 0);
  EXPECT_THROW(set_class_weights(lab, {0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}, 0),
               PreconditionError);
}

TEST(ClassWeights, Estimate) {
  auto w = estimate_class_weights({0, 1, 1, kUnlabeled, 2, 1}, 3);
  EXPECT_DOUBLE_EQ(w[0], 0.2);
  EXPECT_DOUBLE_EQ(w[1], 0.6);
  EXPECT_DOUBLE_EQ(w[2], 0.2);
}

TEST(Csv, RoundTrip) {
  auto dir = temp_dir("got_csv_rt");
  LabeledDataset ds =
      partial_labeling(make_two_moons({.n_train_per_class = 20, .n_test_per_class = 5}), 4, 1);
  save_csv(ds, dir);
  CsvLoadReport rep;
  LabeledDataset back = load_csv_labeled(dir / "source.csv", dir / "target.csv", {}, &rep);
  EXPECT_EQ(back.source.buffer(), ds.source.buffer());
  EXPECT_EQ(back.target.buffer(), ds.target.buffer());
  EXPECT_EQ(back.source_labels, ds.source_labels);
  EXPECT_EQ(back.target_labels, ds.target_labels);
  EXPECT_EQ(back.target_train, ds.target_train);
  EXPECT_EQ(back.num_classes, 2u);
  EXPECT_EQ(rep.source_rejected, 0u);
  std::filesystem::remove_all(dir);
}

TEST(Csv, NanRowRejected) {
  auto dir = temp_dir("got_csv_nan");
  {
    std::ofstream s(dir / "s.csv");
    s << "f0,f1,label,split\n0.1,0.2,0,train\nnan,0.3,1,train\n0.5,0.6,1,test\n0.7,0.1,0,test\n";
    std::ofstream t(dir / "t.csv");
    t << "f0,f1,label,split\n1,2,0,train\n3,4,1,train\n5,6,0,test\n7,8,1,test\n";
  }
  CsvLoadReport rep;
  LabeledDataset ds = load_csv_labeled(dir / "s.csv", dir / "t.csv", {}, &rep);
  EXPECT_EQ(ds.source.rows(), 3u);
  EXPECT_EQ(rep.source_rejected, 1u);
  EXPECT_EQ(rep.source_rows, 3u);
  EXPECT_EQ(rep.target_rejected, 0u);
  std::filesystem::remove_all(dir);
}

TEST(Csv, MissingLabelColumn) {
  auto dir = temp_dir("got_csv_bad");
  {
    std::ofstream s(dir / "s.csv");
    s << "f0,f1,split\n0.1,0.2,train\n";
  }
  EXPECT_ANY_THROW(load_csv_labeled(dir / "s.csv", dir / "s.csv"));
  std::filesystem::remove_all(dir);
}
