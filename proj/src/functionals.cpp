#include "got/functionals.hpp"

#include <cmath>

#include "got/errors.hpp"

namespace got {

void ClassBatch::validate(std::size_t latent_dim) const {
  if (X.rank() != 2 || Y.rank() != 2 || X.cols() != Y.cols()) {
    throw DimensionError("class batch: X and Y must be matrices of equal width");
  }
  if (X.rows() < 1 || Y.rows() < 1) throw PreconditionError("class batch: empty X or Y");
  if (k_z < 1) throw PreconditionError("class batch: K_Z must be >= 1");
  if (latent_dim == 0) {
    if (!Z.empty()) throw DimensionError("class batch: latent given for deterministic map");
    if (k_z != 1) throw PreconditionError("class batch: deterministic map needs K_Z = 1");
  } else if (Z.rank() != 2 || Z.rows() != X.rows() * k_z || Z.cols() != latent_dim) {
    throw DimensionError("class batch: latent must be [K_X*K_Z, " +
                         std::to_string(latent_dim) + "], got " + shape_string(Z.shape()));
  }
}

void FunctionalKind::validate() const {
  if (!(gamma >= 0.0) || !(gamma_reg >= 0.0)) {
    throw ConfigError("functional weights gamma and gamma_reg must be >= 0");
  }
}

std::string functional_name(FunctionalTag tag) {
  switch (tag) {
    case FunctionalTag::ClassGuided: return "class_guided";
    case FunctionalTag::Quadratic: return "quadratic";
    case FunctionalTag::GammaWeakQuadratic: return "gamma_weak_quadratic";
  }
  return "?";
}

FunctionalTag parse_functional(const std::string& name) {
  if (name == "class_guided") return FunctionalTag::ClassGuided;
  if (name == "quadratic") return FunctionalTag::Quadratic;
  if (name == "gamma_weak_quadratic") return FunctionalTag::GammaWeakQuadratic;
  throw ConfigError("unknown functional '" + name +
                    "' (expected class_guided, quadratic or gamma_weak_quadratic)");
}

namespace {

// Weights over an n x n self-distance matrix selecting ordered pairs whose
// rows lie in the same block of `block` rows but are distinct.
std::vector<double> within_block_offdiag(std::size_t n, std::size_t block, double w) {
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b0 = i / block * block;
    for (std::size_t j = b0; j < b0 + block; ++j) {
      if (j != i) out[i * n + j] = w;
    }
  }
  return out;
}

}  // namespace

Var energy_distance_sq_estimate(Var A, Var B) {
  const std::size_t N = A.value().rows(), M = B.value().rows();
  if (A.value().rank() != 2 || B.value().rank() != 2 || A.value().cols() != B.value().cols()) {
    throw DimensionError("energy distance: operands must be matrices of equal width");
  }
  if (N < 2 || M < 2) {
    throw PreconditionError("energy distance needs at least 2 points per sample");
  }
  Var cross = mean(pairwise_euclidean(A, B));
  Var aa = weighted_sum(pairwise_euclidean(A, A),
                        within_block_offdiag(N, N, 0.5 / static_cast<double>(N * (N - 1))));
  Var bb = weighted_sum(pairwise_euclidean(B, B),
                        within_block_offdiag(M, M, 0.5 / static_cast<double>(M * (M - 1))));
  return sub(sub(cross, aa), bb);
}

Var class_guided_images(Var t, Var y, std::size_t k_x, std::size_t k_z,
                        std::size_t num_blocks) {
  const Tensor& tv = t.value();
  const Tensor& yv = y.value();
  if (num_blocks < 1 || k_x < 1 || k_z < 1) {
    throw PreconditionError("class-guided estimator: K_X, K_Z and block count must be >= 1");
  }
  if (tv.rank() != 2 || yv.rank() != 2 || tv.cols() != yv.cols()) {
    throw DimensionError("class-guided estimator: images and targets must share width");
  }
  const std::size_t rows_t = k_x * k_z;
  if (tv.rows() != rows_t * num_blocks || yv.rows() % num_blocks != 0 || yv.rows() == 0) {
    throw DimensionError("class-guided estimator: block layout does not match shapes " +
                         shape_string(tv.shape()) + " / " + shape_string(yv.shape()));
  }
  const std::size_t k_y = yv.rows() / num_blocks;
  const double nb = static_cast<double>(num_blocks);

  const std::size_t NY = yv.rows(), NT = tv.rows();
  std::vector<double> w1(NY * NT, 0.0);
  const double c1 = 1.0 / (static_cast<double>(k_y * k_x * k_z) * nb);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    for (std::size_t i = b * k_y; i < (b + 1) * k_y; ++i) {
      for (std::size_t j = b * rows_t; j < (b + 1) * rows_t; ++j) w1[i * NT + j] = c1;
    }
  }
  Var first = weighted_sum(pairwise_euclidean(y, t), std::move(w1));
  if (k_x < 2) {
    warn("class-guided estimator: K_X < 2, cross-x term set to 0");
    return first;
  }

  const double kx = static_cast<double>(k_x), kz = static_cast<double>(k_z);
  const double c2 = 1.0 / (2.0 * (kx * kx - kx) * kz * kz * nb);
  std::vector<double> w2(NT * NT, 0.0);
  for (std::size_t i = 0; i < NT; ++i) {
    const std::size_t b0 = i / rows_t * rows_t;
    const std::size_t xi = i / k_z;
    for (std::size_t j = b0; j < b0 + rows_t; ++j) {
      if (j / k_z != xi) w2[i * NT + j] = c2;
    }
  }
  Var second = weighted_sum(pairwise_euclidean(t, t), std::move(w2));
  return sub(first, second);
}

namespace {

Var map_images(Graph& g, const ClassBatch& b, TransportMap& T, bool trainable) {
  b.validate(T.latent_dim());
  Var x = repeat_rows(g.frozen(b.X), b.k_z);
  if (T.stochastic()) return T.forward(x, g.frozen(b.Z), trainable);
  return T.forward(x, std::nullopt, trainable);
}

}  // namespace

Var class_guided_term(Graph& g, const ClassBatch& batch, TransportMap& T, bool trainable) {
  Var t = map_images(g, batch, T, trainable);
  return class_guided_images(t, g.frozen(batch.Y), batch.k_x(), batch.k_z);
}

Var class_guided_cost(Graph& g, const std::vector<ClassBatch>& batches, TransportMap& T,
                      bool trainable) {
  if (batches.empty()) throw PreconditionError("class_guided_cost: no batches");
  Var total;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    Var term = class_guided_term(g, batches[k], T, trainable);
    total = k == 0 ? term : add(total, term);
  }
  return scale(total, 1.0 / static_cast<double>(batches.size()));
}

Var quadratic_cost(Var x, Var t) {
  if (x.value().shape() != t.value().shape() || x.value().rank() != 2) {
    throw DimensionError("quadratic cost: shape mismatch " + shape_string(x.value().shape()) +
                         " vs " + shape_string(t.value().shape()));
  }
  const double B = static_cast<double>(x.value().rows());
  return scale(sum(square(sub(x, t))), 0.5 / B);
}

Var repeat_rows(Var x, std::size_t k) {
  if (k == 1) return x;
  const std::size_t R = x.value().rows();
  std::vector<std::size_t> idx;
  idx.reserve(R * k);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < k; ++j) idx.push_back(r);
  }
  return gather_rows(x, std::move(idx));
}

Var gamma_weak_quadratic_cost(Var x, Var t, std::size_t k_z, double gamma) {
  if (k_z < 2) throw PreconditionError("gamma-weak cost needs K_Z >= 2");
  const std::size_t B = x.value().rows();
  if (t.value().rank() != 2 || t.value().rows() != B * k_z ||
      t.value().cols() != x.value().cols()) {
    throw DimensionError("gamma-weak cost: images must be [B*K_Z, D]");
  }
  Var transport = quadratic_cost(repeat_rows(x, k_z), t);
  if (gamma == 0.0) return transport;
  // sum_z |t_z - tbar|^2 = sum_{z<z'} |t_z - t_z'|^2 / K_Z.
  const double kz = static_cast<double>(k_z);
  const double w = 0.5 * gamma / (2.0 * kz * (kz - 1.0) * static_cast<double>(B));
  Var var = weighted_sum(pairwise_sq_euclidean(t, t), within_block_offdiag(B * k_z, k_z, w));
  return sub(transport, var);
}

Var conditional_interaction_energy(Var t, std::size_t k_z) {
  if (k_z < 2) throw PreconditionError("interaction energy needs K_Z >= 2");
  const std::size_t n = t.value().rows();
  if (t.value().rank() != 2 || n % k_z != 0 || n == 0) {
    throw DimensionError("interaction energy: images must be [B*K_Z, D]");
  }
  const double B = static_cast<double>(n / k_z), kz = static_cast<double>(k_z);
  const double w = -0.5 / (B * kz * (kz - 1.0));
  return weighted_sum(pairwise_euclidean(t, t), within_block_offdiag(n, k_z, w));
}

Var general_functional(const FunctionalKind& kind, Var x, Var t, std::size_t k_z) {
  kind.validate();
  Var cost;
  switch (kind.tag) {
    case FunctionalTag::Quadratic:
      cost = quadratic_cost(repeat_rows(x, k_z), t);
      break;
    case FunctionalTag::GammaWeakQuadratic:
      cost = gamma_weak_quadratic_cost(x, t, k_z, kind.gamma);
      break;
    case FunctionalTag::ClassGuided:
      throw PreconditionError("class-guided functional needs labeled class batches");
  }
  if (kind.gamma_reg > 0.0) {
    cost = add(cost, scale(conditional_interaction_energy(t, k_z), kind.gamma_reg));
  }
  return cost;
}

}  // namespace got
