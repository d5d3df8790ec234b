#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "got/autodiff.hpp"
#include "got/networks.hpp"
#include "got/tensor.hpp"

namespace got {

/// One class-conditional mini-batch for the class-guided estimator.
///
/// Z holds K_X * K_Z latent rows in x-major order: rows [i*K_Z, (i+1)*K_Z)
/// belong to X row i. With a deterministic map Z is empty and k_z is 1.
struct ClassBatch {
  std::size_t cls = 0;
  Tensor X;  // [K_X, D]
  Tensor Y;  // [K_Y, D]
  Tensor Z;  // [K_X*K_Z, latent] or empty
  std::size_t k_z = 1;

  std::size_t k_x() const { return X.rows(); }
  std::size_t k_y() const { return Y.rows(); }
  void validate(std::size_t latent_dim) const;
};

enum class FunctionalTag { ClassGuided, Quadratic, GammaWeakQuadratic };

struct FunctionalKind {
  FunctionalTag tag = FunctionalTag::ClassGuided;
  double gamma = 0.0;      // weak-cost variance weight
  double gamma_reg = 0.0;  // weight of the added interaction-energy regularizer

  void validate() const;
};

std::string functional_name(FunctionalTag tag);
FunctionalTag parse_functional(const std::string& name);

// Squared energy distance with U-statistic within-sample means:
// mean ||a-b|| - 1/2 mean_{i!=i'} ||a_i-a_i'|| - 1/2 mean_{j!=j'} ||b_j-b_j'||.
Var energy_distance_sq_estimate(Var A, Var B);

// Class-guided estimator on precomputed images t = T(x, z), laid out as
// num_blocks independent batches of K_X*K_Z rows, against y laid out as
// num_blocks batches of K_Y rows. Returns the mean over blocks of
//   sum ||y - t|| / (K_Y K_X K_Z) - sum_{x != x'} ||t - t'|| / (2 (K_X^2 - K_X) K_Z^2).
Var class_guided_images(Var t, Var y, std::size_t k_x, std::size_t k_z,
                        std::size_t num_blocks = 1);

Var class_guided_term(Graph& g, const ClassBatch& batch, TransportMap& T, bool trainable);

// Mean of class_guided_term over the batches, which must share K_X, K_Y, K_Z.
Var class_guided_cost(Graph& g, const std::vector<ClassBatch>& batches, TransportMap& T,
                      bool trainable);

// mean_i 1/2 ||x_i - t_i||^2.
Var quadratic_cost(Var x, Var t);

// x [B,D]; t [B*K_Z, D] in x-major order.
// mean_i [ mean_z 1/2 ||x_i - t_iz||^2 - gamma/2 * sum_z ||t_iz - tbar_i||^2 / (K_Z - 1) ].
Var gamma_weak_quadratic_cost(Var x, Var t, std::size_t k_z, double gamma);

// -1/2 mean_i mean_{z != z'} ||t_iz - t_iz'||, t [B*K_Z, D] in x-major order.
Var conditional_interaction_energy(Var t, std::size_t k_z);

// Repeats each row of x k times (x-major), matching the latent layout.
Var repeat_rows(Var x, std::size_t k);

// Generic estimator F(X, T(X,Z)) for the non-class-guided functionals, plus
// gamma_reg * R_l when configured. x [B,D], t [B*K_Z,D].
Var general_functional(const FunctionalKind& kind, Var x, Var t, std::size_t k_z);

}  // namespace got
