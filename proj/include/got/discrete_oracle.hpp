#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace got::oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finite-support instance: P on the rows of X with weights p, Q on the rows
/// of Y with weights q, one class label per support point.
struct DiscreteProblem {
  Matrix X;  // [N_x, D]
  Vector p;
  std::vector<int> x_labels;
  Matrix Y;  // [N_y, D]
  Vector q;
  std::vector<int> y_labels;
  std::size_t num_classes = 0;

  // Filled by finalize(): class weights and the target distance matrix.
  Vector alpha;
  Vector beta;
  Matrix dist_y;

  // Validates the instance and computes alpha, beta and dist_y.
  void finalize();
  std::size_t nx() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t ny() const { return static_cast<std::size_t>(Y.rows()); }
};

/// Plan pi in Pi(P) (rows sum to p); `coupled` marks membership in Pi(P,Q).
struct DiscretePlan {
  Matrix pi;
  bool coupled = false;
};

// F = F_G + gamma_reg * R_l.
struct Objective {
  double gamma_reg = 0.0;
};

// Throws PreconditionError unless pi >= 0 with row sums p (and column sums q
// when coupled) within tol.
void validate_plan(const DiscretePlan& plan, const DiscreteProblem& prob, double tol = 1e-10);

double eval_F_G(const Matrix& pi, const DiscreteProblem& prob);
double eval_R_l(const Matrix& pi, const DiscreteProblem& prob);
double eval_F(const Matrix& pi, const DiscreteProblem& prob, const Objective& F);
Matrix grad_F(const Matrix& pi, const DiscreteProblem& prob, const Objective& F);

// rho_l^2 = sum_i p_i E_l^2(pi1(.|x_i), pi2(.|x_i)) with l = ||.||_2.
double rho_l_sq(const Matrix& pi1, const Matrix& pi2, const DiscreteProblem& prob);
double rho_l(const Matrix& pi1, const Matrix& pi2, const DiscreteProblem& prob);

// L(v, pi) = F(pi) - sum_j v_j pi_y(j) + sum_j v_j q_j.
double lagrangian(const Vector& v, const Matrix& pi, const DiscreteProblem& prob,
                  const Objective& F);

// Euclidean projections.
Vector project_simplex(const Vector& y, double mass);
Matrix project_rows(const Matrix& pi, const Vector& p);
Matrix project_coupling(const Matrix& pi, const Vector& p, const Vector& q,
                        double tol = 1e-14, int max_iters = 100000);

struct SolverOptions {
  double tol = 1e-10;  // infinity norm of the gradient mapping
  int max_iters = 200000;
};

struct PrimalSolution {
  DiscretePlan plan;
  double cost = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

// argmin of F over Pi(P,Q).
PrimalSolution solve_primal(const DiscreteProblem& prob, const Objective& F,
                            const SolverOptions& options = {});

struct InnerSolution {
  DiscretePlan plan;
  double value = 0.0;  // L(v, pi^v)
  int iterations = 0;
  double residual = 0.0;
};

// argmin over Pi(P) of L(v, .).
InnerSolution inf_over_Pi_P(const Vector& v, const DiscreteProblem& prob, const Objective& F,
                            const SolverOptions& options = {});

struct DualSolution {
  Vector v;
  double value = 0.0;  // inf_pi L(v, pi)
  int iterations = 0;
};

// Maximizes g(v) = inf_pi L(v, pi), starting from a KKT estimate at the
// primal optimum.
DualSolution maximize_dual(const DiscreteProblem& prob, const Objective& F,
                           const PrimalSolution& primal, double tol = 1e-9,
                           int max_iters = 2000);

struct GapReport {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double rho = 0.0;
  double bound = 0.0;
  double beta = 0.0;
  bool holds = false;
};

inline constexpr double kBoundSlack = 1e-7;

// Gaps of (v_hat, pi_hat) with pi_hat in Pi(P); beta = gamma_reg > 0.
GapReport duality_gaps(const Vector& v_hat, const Matrix& pi_hat, const DiscreteProblem& prob,
                       const Objective& F, const PrimalSolution& primal,
                       const SolverOptions& options = {});
GapReport duality_gaps(const Vector& v_hat, const Matrix& pi_hat, const DiscreteProblem& prob,
                       const Objective& F, const SolverOptions& options = {});

// |R(a pi1 + (1-a) pi2) - a R(pi1) - (1-a) R(pi2) + a(1-a)/2 rho^2(pi1, pi2)|.
double strong_convexity_identity_check(const Matrix& pi1, const Matrix& pi2, double a,
                                       const DiscreteProblem& prob);

// a F_G(pi1) + (1-a) F_G(pi2) - F_G(a pi1 + (1-a) pi2).
double convexity_check_F_G(const Matrix& pi1, const Matrix& pi2, double a,
                           const DiscreteProblem& prob);

using Rng = std::mt19937_64;

struct InstanceSpec {
  std::size_t min_classes = 2;
  std::size_t max_classes = 3;
  std::size_t max_nx = 5;
  std::size_t max_ny = 5;
  std::size_t min_nx = 0;  // 0: number of classes
  std::size_t min_ny = 0;
  std::size_t dim = 2;
};

// Points uniform in [0,1]^D, weights U(0.5, 1.5) normalized, every class
// present on both sides.
DiscreteProblem random_problem(const InstanceSpec& spec, Rng& rng);
Matrix random_plan_P(const DiscreteProblem& prob, Rng& rng);
Matrix random_plan_PQ(const DiscreteProblem& prob, Rng& rng);
Matrix product_plan(const DiscreteProblem& prob);

struct VerifyCase {
  std::size_t instance = 0;
  double gamma_reg = 0.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t num_classes = 0;
  double v_scale = 0.0;  // std of the Gaussian perturbation of v*
  double mix = 0.0;      // weight of the random plan mixed into pi^{v_hat}
  int primal_iterations = 0;
  GapReport gap;
};

// One bound check: solves the instance, perturbs the dual optimum and the
// induced plan, then measures the gaps. The instance depends on (seed,
// instance) only, so every gamma sees the same problem.
VerifyCase verify_instance(std::size_t instance, double gamma_reg, const InstanceSpec& spec,
                           std::uint64_t seed, const SolverOptions& options = {});

}  // namespace got::oracle
