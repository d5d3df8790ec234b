#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "got/errors.hpp"
#include "got/functionals.hpp"
#include "got/optim.hpp"
#include "oracles.hpp"

using namespace got;

namespace {

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  std::normal_distribution<double> nd(0.0, scale);
  for (double& x : t.buffer()) x = nd(rng);
  return t;
}

double ed(const Tensor& A, const Tensor& B) {
  Graph g;
  return energy_distance_sq_estimate(g.frozen(A), g.frozen(B)).item();
}

// T(x) = x in one dimension: relu(x) - relu(-x).
TransportMap identity_map_1d() {
  Mlp m({1, 2, 1, 1}, 0);
  auto& p = m.parameters();
  p[0] = Tensor({1, 2}, std::vector<double>{1, -1});
  p[1] = Tensor({2}, 0.0);
  p[2] = Tensor({2, 1}, std::vector<double>{1, -1});
  p[3] = Tensor({1}, 0.0);
  for (auto& t : p) t.set_requires_grad(true);
  return TransportMap(1, 0, std::move(m));
}

// Output is the constant c regardless of input.
TransportMap constant_map(std::vector<double> c, std::size_t latent) {
  const std::size_t D = c.size();
  Mlp m({D + latent, 2, 1, D}, 0);
  auto& p = m.parameters();
  p[0] = Tensor({D + latent, 2}, 0.0);
  p[2] = Tensor({2, D}, 0.0);
  p[3] = Tensor({D}, std::move(c));
  for (auto& t : p) t.set_requires_grad(true);
  return TransportMap(D, latent, std::move(m));
}

}  // namespace

TEST(EnergyDistance, IdenticalSamples) {
  // The cross mean runs over all N^2 pairs, N of them on the diagonal, while
  // the within-sample means skip the diagonal: the estimate is -offdiag/N.
  // The plug-in value between the two empirical measures is exactly zero.
  Rng rng(1);
  Tensor A = randn({6, 2}, rng);
  double off = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t k = 0; k < 6; ++k) {
      if (k != i) off += got_test::smooth_dist(&A.at(i, 0), &A.at(k, 0), 2) / 30;
    }
  }
  const double diag = std::sqrt(kDistanceSmoothing);
  EXPECT_NEAR(ed(A, A), -off / 6 + diag / 6, 1e-12);
}

TEST(EnergyDistance, UnbiasedForEqualLaws) {
  Rng rng(14);
  double acc = 0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) acc += ed(randn({4, 2}, rng), randn({4, 2}, rng));
  // Per-draw std is about 0.5; 4000 draws put 5 sigma near 0.04.
  EXPECT_LT(std::abs(acc / reps), 0.04);
}

TEST(EnergyDistance, DuplicatedPointMasses) {
  EXPECT_NEAR(ed(Tensor::matrix({{0, 0}, {0, 0}}), Tensor::matrix({{3, 4}, {3, 4}})), 5.0, 2e-6);
}

TEST(EnergyDistance, OffDiagonalMeans) {
  // A = {0, 2}, B = {1, 1}: cross mean 1, within-A off-diagonal mean 2,
  // within-B 0. The off-diagonal estimator gives 1 - 1 - 0 = 0, while the
  // plug-in value with diagonal pairs included is 1 - 0.5 - 0 = 0.5.
  Tensor A = Tensor::matrix({{0}, {2}}), B = Tensor::matrix({{1}, {1}});
  EXPECT_NEAR(ed(A, B), 0.0, 2e-6);
  double cross = 0, aa = 0, bb = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      cross += std::abs(A[i] - B[j]) / 4;
      aa += std::abs(A[i] - A[j]) / 4;
      bb += std::abs(B[i] - B[j]) / 4;
    }
  }
  EXPECT_DOUBLE_EQ(cross - 0.5 * aa - 0.5 * bb, 0.5);
}

TEST(EnergyDistance, MatchesNaiveUStatistic) {
  Rng rng(2);
  Tensor A = randn({5, 3}, rng), B = randn({4, 3}, rng);
  double cross = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) cross += got_test::smooth_dist(&A.at(i, 0), &B.at(j, 0), 3);
    for (std::size_t k = 0; k < 5; ++k) {
      if (k != i) aa += got_test::smooth_dist(&A.at(i, 0), &A.at(k, 0), 3);
    }
  }
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (k != j) bb += got_test::smooth_dist(&B.at(j, 0), &B.at(k, 0), 3);
    }
  }
  const double expected = cross / 20 - 0.5 * aa / 20 - 0.5 * bb / 12;
  EXPECT_NEAR(ed(A, B), expected, 1e-12);
  EXPECT_NEAR(ed(A, B), ed(B, A), 1e-12);
}

TEST(EnergyDistance, Preconditions) {
  EXPECT_THROW(ed(Tensor::matrix({{0, 0}}), Tensor::matrix({{1, 1}, {2, 2}})), PreconditionError);
  EXPECT_THROW(ed(Tensor::matrix({{0, 0}, {1, 1}}), Tensor::matrix({{1}, {2}})), DimensionError);
}

TEST(EnergyDistance, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  std::vector<Tensor> p = {randn({4, 2}, rng), randn({5, 2}, rng)};
  std::vector<Tensor*> ptrs;
  for (auto& t : p) {
    t.set_requires_grad(true);
    ptrs.push_back(&t);
  }
  auto r = finite_difference_check(
      [&](Graph& g) { return energy_distance_sq_estimate(g.leaf(p[0]), g.leaf(p[1])); }, ptrs);
  EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(ClassGuided, HandEnumeratedIdentityCase) {
  TransportMap T = identity_map_1d();
  ClassBatch cb;
  cb.X = Tensor::matrix({{0}, {1}});
  cb.Y = Tensor::matrix({{1}});
  Graph g;
  // first (1 + 0)/2 = 0.5, second (1 + 1)/(2*2*1) = 0.5.
  EXPECT_NEAR(class_guided_term(g, cb, T, false).item(), 0.0, 2e-6);
}

TEST(ClassGuided, CollapseToTargetIsZero) {
  TransportMap T = constant_map({0.3, -0.7}, 0);
  ClassBatch cb;
  cb.X = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  cb.Y = Tensor::matrix({{0.3, -0.7}});
  Graph g;
  EXPECT_NEAR(class_guided_term(g, cb, T, false).item(), 0.0, 2e-6);
}

TEST(ClassGuided, SingleSourceWarnsAndDropsCrossTerm) {
  int warnings = 0;
  auto prev = set_warning_handler([&](std::string_view) { ++warnings; });
  TransportMap T = identity_map_1d();
  ClassBatch cb;
  cb.X = Tensor::matrix({{0}});
  cb.Y = Tensor::matrix({{2}});
  Graph g;
  EXPECT_NEAR(class_guided_term(g, cb, T, false).item(), 2.0, 2e-6);
  EXPECT_EQ(warnings, 1);
  set_warning_handler(prev);
}

TEST(ClassGuided, ExpectationMatchesPopulationValue) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 4; ++rep) {
    const bool stoch = rep % 2 == 0;
    auto inst = got_test::random_finite_instance(2 + rep % 2, 2, 2, stoch ? 2 : 0, rng);
    TransportMap T(2, stoch ? 2 : 0, 8, 2, rng());
    const double lhs = got_test::class_guided_enumerated(inst, T, 2, 2, 2);
    const double rhs = got_test::class_guided_population(inst, T);
    EXPECT_NEAR(lhs, rhs, 1e-12) << "rep " << rep;
  }
}

TEST(ClassGuided, CostWithOneBatchEqualsTerm) {
  Rng rng(5);
  TransportMap T(2, 2, 8, 2, 6);
  ClassBatch cb;
  cb.X = randn({3, 2}, rng);
  cb.Y = randn({2, 2}, rng);
  cb.Z = randn({6, 2}, rng);
  cb.k_z = 2;
  Graph g;
  const double term = class_guided_term(g, cb, T, false).item();
  EXPECT_DOUBLE_EQ(class_guided_cost(g, {cb}, T, false).item(), term);
}

TEST(ClassGuided, StackedBlocksAverageIndependentTerms) {
  Rng rng(7);
  TransportMap T(2, 0, 8, 2, 8);
  std::vector<ClassBatch> bs(3);
  std::vector<Tensor> imgs, ys;
  double mean_term = 0;
  for (auto& cb : bs) {
    cb.X = randn({2, 2}, rng);
    cb.Y = randn({2, 2}, rng);
    Graph g;
    mean_term += class_guided_term(g, cb, T, false).item() / 3;
    imgs.push_back(T.apply(cb.X));
    ys.push_back(cb.Y);
  }
  Graph g;
  Var v = class_guided_images(g.constant(concat_rows(imgs)), g.constant(concat_rows(ys)), 2, 1, 3);
  EXPECT_NEAR(v.item(), mean_term, 1e-12);
}

TEST(ClassGuided, BatchValidation) {
  TransportMap T(2, 2, 8, 2, 0);
  ClassBatch cb;
  cb.X = Tensor({2, 2});
  cb.Y = Tensor({2, 2});
  Graph g;
  EXPECT_THROW(class_guided_term(g, cb, T, false), DimensionError);
}

TEST(QuadraticCost, Examples) {
  Graph g;
  Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(quadratic_cost(g.frozen(x), g.frozen(x)).item(), 0.0);
  EXPECT_DOUBLE_EQ(
      quadratic_cost(g.constant(Tensor::matrix({{0, 0}})), g.constant(Tensor::matrix({{3, 4}})))
          .item(),
      12.5);
  EXPECT_THROW(quadratic_cost(g.frozen(x), g.constant(Tensor({3, 2}))), DimensionError);
}

TEST(QuadraticCost, MatchesNaiveLoop) {
  Rng rng(9);
  Tensor x = randn({7, 3}, rng), t = randn({7, 3}, rng);
  double s = 0;
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t k = 0; k < 3; ++k) s += 0.5 * std::pow(x.at(i, k) - t.at(i, k), 2);
  }
  Graph g;
  EXPECT_NEAR(quadratic_cost(g.frozen(x), g.frozen(t)).item(), s / 7, 1e-12);
}

TEST(GammaWeak, HandComputedExample) {
  Graph g;
  Var v = gamma_weak_quadratic_cost(g.constant(Tensor::matrix({{1}})),
                                    g.constant(Tensor::matrix({{0}, {2}})), 2, 1.0);
  EXPECT_NEAR(v.item(), -0.5, 1e-12);
}

TEST(GammaWeak, ZeroGammaIsQuadraticOverLatents) {
  Rng rng(10);
  Tensor x = randn({3, 2}, rng), t = randn({9, 2}, rng);
  Graph g;
  double q = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t k = 0; k < 2; ++k) q += 0.5 * std::pow(x.at(i / 3, k) - t.at(i, k), 2);
  }
  EXPECT_NEAR(gamma_weak_quadratic_cost(g.frozen(x), g.frozen(t), 3, 0.0).item(), q / 9, 1e-12);
}

TEST(GammaWeak, IdenticalSamplesHaveNoVarianceTerm) {
  Tensor x = Tensor::matrix({{0, 0}});
  Tensor t = Tensor::matrix({{1, 1}, {1, 1}, {1, 1}});
  Graph g;
  EXPECT_NEAR(gamma_weak_quadratic_cost(g.frozen(x), g.frozen(t), 3, 5.0).item(),
              gamma_weak_quadratic_cost(g.frozen(x), g.frozen(t), 3, 0.0).item(), 1e-12);
}

TEST(GammaWeak, MatchesNaiveVariance) {
  Rng rng(11);
  Tensor x = randn({2, 2}, rng), t = randn({8, 2}, rng);
  const double gamma = 0.7;
  double total = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    double mx = 0, my = 0, cost = 0, var = 0;
    for (std::size_t z = 0; z < 4; ++z) {
      mx += t.at(4 * i + z, 0) / 4;
      my += t.at(4 * i + z, 1) / 4;
      cost += 0.5 * (std::pow(x.at(i, 0) - t.at(4 * i + z, 0), 2) +
                     std::pow(x.at(i, 1) - t.at(4 * i + z, 1), 2)) / 4;
    }
    for (std::size_t z = 0; z < 4; ++z) {
      var += (std::pow(t.at(4 * i + z, 0) - mx, 2) + std::pow(t.at(4 * i + z, 1) - my, 2)) / 3;
    }
    total += (cost - 0.5 * gamma * var) / 2;
  }
  Graph g;
  EXPECT_NEAR(gamma_weak_quadratic_cost(g.frozen(x), g.frozen(t), 4, gamma).item(), total, 1e-12);
  EXPECT_THROW(gamma_weak_quadratic_cost(g.frozen(x), g.frozen(t), 1, gamma), PreconditionError);
}

TEST(InteractionEnergy, Examples) {
  Graph g;
  EXPECT_NEAR(conditional_interaction_energy(g.constant(Tensor::matrix({{0}, {2}})), 2).item(),
              -1.0, 1e-9);
  EXPECT_NEAR(
      conditional_interaction_energy(g.constant(Tensor::matrix({{1, 1}, {1, 1}, {1, 1}})), 3)
          .item(),
      0.0, 1e-5);
  EXPECT_THROW(conditional_interaction_energy(g.constant(Tensor::matrix({{1}})), 1),
               PreconditionError);
}

TEST(InteractionEnergy, MonotoneUnderScaling) {
  Rng rng(12);
  Tensor t = randn({6, 2}, rng);
  double prev = 0;
  for (double c : {1.0, 1.5, 2.0, 4.0}) {
    Tensor s = t;
    for (double& v : s.buffer()) v *= c;
    Graph g;
    const double r = conditional_interaction_energy(g.frozen(s), 3).item();
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(GeneralFunctional, AddsRegularizer) {
  Rng rng(13);
  Tensor x = randn({3, 2}, rng), t = randn({6, 2}, rng);
  Graph g;
  const double base = general_functional({FunctionalTag::Quadratic, 0, 0}, g.frozen(x),
                                         g.frozen(t), 2).item();
  const double reg = conditional_interaction_energy(g.frozen(t), 2).item();
  const double full = general_functional({FunctionalTag::Quadratic, 0, 0.01}, g.frozen(x),
                                         g.frozen(t), 2).item();
  EXPECT_NEAR(full, base + 0.01 * reg, 1e-12);
  EXPECT_THROW(general_functional({FunctionalTag::ClassGuided, 0, 0}, g.frozen(x), g.frozen(t), 2),
               PreconditionError);
  EXPECT_THROW(FunctionalKind({FunctionalTag::Quadratic, -1, 0}).validate(), ConfigError);
}

TEST(Functional, NamesRoundTrip) {
  for (auto tag : {FunctionalTag::ClassGuided, FunctionalTag::Quadratic,
                   FunctionalTag::GammaWeakQuadratic}) {
    EXPECT_EQ(parse_functional(functional_name(tag)), tag);
  }
  EXPECT_THROW(parse_functional("nope"), ConfigError);
}
