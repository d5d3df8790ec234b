#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "got/errors.hpp"
#include "got/networks.hpp"
#include "got/optim.hpp"

using namespace got;

namespace {

Tensor randn(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  std::normal_distribution<double> nd;
  for (double& x : t.buffer()) x = nd(rng);
  return t;
}

}  // namespace

TEST(Mlp, SameSeedSameParameters) {
  Mlp a({2, 16, 2, 2}, 42), b({2, 16, 2, 2}, 42), c({2, 16, 2, 2}, 43);
  ASSERT_EQ(a.parameters().size(), 6u);
  for (std::size_t k = 0; k < a.parameters().size(); ++k) {
    EXPECT_EQ(a.parameters()[k].buffer(), b.parameters()[k].buffer());
  }
  EXPECT_NE(a.parameters()[0].buffer(), c.parameters()[0].buffer());
}

TEST(Mlp, HeInitVarianceAndZeroBiases) {
  Mlp m({2, 128, 2, 2}, 7);
  const auto& params = m.parameters();
  // Hidden-to-hidden layer: fan_in 128.
  const Tensor& W = params[2];
  ASSERT_EQ(W.dim(0), 128u);
  double s = 0, s2 = 0;
  for (double w : W.data()) {
    s += w;
    s2 += w * w;
  }
  const double n = static_cast<double>(W.size());
  const double var = s2 / n - (s / n) * (s / n);
  const double expected = 2.0 / 128.0;
  EXPECT_LT(std::abs(var - expected) / expected, 0.2);
  for (std::size_t k = 1; k < params.size(); k += 2) {
    for (double b : params[k].data()) EXPECT_EQ(b, 0.0);
  }
}

TEST(Mlp, InvalidConfig) {
  EXPECT_THROW(Mlp({2, 0, 2, 2}, 0), ConfigError);
  EXPECT_THROW(Mlp({2, 8, 0, 2}, 0), ConfigError);
}

TEST(TransportMap, FreshOutputIsFinite) {
  TransportMap T(2, 2, 32, 2, 1);
  Rng rng(2);
  Tensor x = randn({50, 2}, rng), z = randn({50, 2}, rng);
  Tensor y = T.apply(x, &z);
  EXPECT_EQ(y.rows(), 50u);
  EXPECT_EQ(y.cols(), 2u);
  EXPECT_TRUE(y.all_finite());
}

TEST(TransportMap, DeterministicModeRejectsLatent) {
  TransportMap T(2, 0, 16, 2, 1);
  Tensor x({3, 2}, 0.5), z({3, 1}, 0.0);
  EXPECT_NO_THROW(T.apply(x));
  EXPECT_THROW(T.apply(x, &z), DimensionError);
}

TEST(TransportMap, StochasticModeRequiresMatchingLatent) {
  TransportMap T(2, 2, 16, 2, 1);
  Tensor x({3, 2}, 0.5), z_bad({2, 2}, 0.0);
  EXPECT_THROW(T.apply(x), DimensionError);
  EXPECT_THROW(T.apply(x, &z_bad), DimensionError);
}

TEST(TransportMap, Purity) {
  TransportMap T(2, 2, 32, 2, 3);
  Rng rng(4);
  Tensor x = randn({10, 2}, rng), z = randn({10, 2}, rng);
  EXPECT_EQ(T.apply(x, &z).buffer(), T.apply(x, &z).buffer());
}

TEST(Potential, BatchIndependence) {
  Potential v(2, 32, 2, 5);
  Rng rng(6);
  Tensor y = randn({7, 2}, rng);
  Tensor out = v.apply(y);
  ASSERT_EQ(out.rows(), 7u);
  ASSERT_EQ(out.cols(), 1u);
  EXPECT_TRUE(out.all_finite());
  std::vector<Tensor> parts = {y, y};
  Tensor doubled = v.apply(concat_rows(parts));
  ASSERT_EQ(doubled.rows(), 14u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_DOUBLE_EQ(doubled[i], out[i]);
    EXPECT_DOUBLE_EQ(doubled[i + 7], out[i]);
  }
}

TEST(Potential, GradientMatchesFiniteDifferences) {
  Potential v(2, 16, 2, 8);
  Rng rng(9);
  auto params = v.mlp().parameter_ptrs();
  std::normal_distribution<double> nd(0, 0.1);
  for (std::size_t k = 1; k < params.size(); k += 2) {
    for (double& b : params[k]->buffer()) b = nd(rng);
  }
  Tensor y = randn({9, 2}, rng);
  auto r = finite_difference_check([&](Graph& g) { return mean(v.forward(g.frozen(y), true)); },
                                   params, 1e-5);
  EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(Potential, RejectsVectorOutput) {
  EXPECT_THROW(Potential(Mlp({2, 8, 1, 2}, 0)), DimensionError);
}

TEST(LatentSampler, MomentsOfStandardGaussian) {
  LatentSampler s(3);
  Rng rng(10);
  Tensor z = s.sample(10000, rng);
  ASSERT_EQ(z.rows(), 10000u);
  ASSERT_EQ(z.cols(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, m2 = 0;
    for (std::size_t r = 0; r < 10000; ++r) {
      m += z.at(r, c);
      m2 += z.at(r, c) * z.at(r, c);
    }
    m /= 10000;
    m2 /= 10000;
    EXPECT_LT(std::abs(m), 4.0 / 100.0);       // 4 sigma of the sample mean
    EXPECT_LT(std::abs(m2 - 1.0), 4.0 * std::sqrt(2.0) / 100.0);
  }
}

TEST(Checkpoint, RoundTrip) {
  TransportMap T(2, 1, 8, 2, 11);
  Potential v(2, 6, 3, 12);
  auto dir = std::filesystem::temp_directory_path() / "got_ckpt_test";
  std::filesystem::create_directories(dir);
  auto path = dir / ("m" + std::string(kCheckpointExtension));
  save_checkpoint(path, T, v, R"({"note":"x"})");
  Checkpoint c = load_checkpoint(path);
  EXPECT_EQ(c.transport.latent_dim(), 1u);
  EXPECT_EQ(c.potential.mlp().config(), v.mlp().config());
  for (std::size_t k = 0; k < T.mlp().parameters().size(); ++k) {
    EXPECT_EQ(c.transport.mlp().parameters()[k].buffer(), T.mlp().parameters()[k].buffer());
  }
  for (std::size_t k = 0; k < v.mlp().parameters().size(); ++k) {
    EXPECT_EQ(c.potential.mlp().parameters()[k].buffer(), v.mlp().parameters()[k].buffer());
  }
  EXPECT_NE(c.metadata_json.find("\"note\""), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MissingFileThrows) {
  EXPECT_ANY_THROW(load_checkpoint("/nonexistent/path.gotckpt"));
}
