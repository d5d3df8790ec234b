#include "got/discrete_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "got/errors.hpp"

namespace got::oracle {

void DiscreteProblem::finalize() {
  const auto Nx = X.rows(), Ny = Y.rows();
  if (Nx < 1 || Ny < 1) throw PreconditionError("discrete problem: empty support");
  if (X.cols() != Y.cols()) throw DimensionError("discrete problem: X and Y differ in D");
  if (p.size() != Nx || q.size() != Ny || static_cast<Eigen::Index>(x_labels.size()) != Nx ||
      static_cast<Eigen::Index>(y_labels.size()) != Ny) {
    throw DimensionError("discrete problem: weights or labels do not match supports");
  }
  if (num_classes < 1) throw PreconditionError("discrete problem: no classes");
  auto check_simplex = [](const Vector& w, const char* name) {
    if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-12) {
      throw PreconditionError(std::string("discrete problem: ") + name +
                              " must lie on the simplex");
    }
  };
  check_simplex(p, "p");
  check_simplex(q, "q");
  alpha = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  beta = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  for (Eigen::Index i = 0; i < Nx; ++i) {
    const int l = x_labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= static_cast<int>(num_classes)) {
      throw PreconditionError("discrete problem: source label out of range");
    }
    alpha(l) += p(i);
  }
  for (Eigen::Index j = 0; j < Ny; ++j) {
    const int l = y_labels[static_cast<std::size_t>(j)];
    if (l < 0 || l >= static_cast<int>(num_classes)) {
      throw PreconditionError("discrete problem: target label out of range");
    }
    beta(l) += q(j);
  }
  for (std::size_t n = 0; n < num_classes; ++n) {
    if (alpha(static_cast<Eigen::Index>(n)) > 0.0 && beta(static_cast<Eigen::Index>(n)) <= 0.0) {
      throw PreconditionError("discrete problem: class " + std::to_string(n) +
                              " has source mass but no target mass");
    }
  }
  dist_y.resize(Ny, Ny);
  for (Eigen::Index a = 0; a < Ny; ++a) {
    for (Eigen::Index b = 0; b < Ny; ++b) dist_y(a, b) = (Y.row(a) - Y.row(b)).norm();
  }
}

namespace {

void require_finalized(const DiscreteProblem& prob) {
  if (prob.dist_y.rows() != prob.Y.rows() || prob.alpha.size() == 0) {
    throw PreconditionError("discrete problem: call finalize() first");
  }
}

void require_shape(const Matrix& pi, const DiscreteProblem& prob) {
  require_finalized(prob);
  if (pi.rows() != prob.X.rows() || pi.cols() != prob.Y.rows()) {
    throw DimensionError("plan must be [N_x, N_y]");
  }
}

// Per-class target distributions Q_n as rows of a [classes, N_y] matrix.
Matrix class_targets(const DiscreteProblem& prob) {
  Matrix Qn = Matrix::Zero(static_cast<Eigen::Index>(prob.num_classes), prob.Y.rows());
  for (Eigen::Index j = 0; j < prob.Y.rows(); ++j) {
    const int n = prob.y_labels[static_cast<std::size_t>(j)];
    Qn(n, j) = prob.q(j) / prob.beta(n);
  }
  return Qn;
}

// Per-class pushforward mass sum_{i in n} pi_i (unnormalized).
Matrix class_mass(const Matrix& pi, const DiscreteProblem& prob) {
  Matrix M = Matrix::Zero(static_cast<Eigen::Index>(prob.num_classes), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    M.row(prob.x_labels[static_cast<std::size_t>(i)]) += pi.row(i);
  }
  return M;
}

}  // namespace

void validate_plan(const DiscretePlan& plan, const DiscreteProblem& prob, double tol) {
  require_shape(plan.pi, prob);
  if (!plan.pi.allFinite()) throw PreconditionError("plan has non-finite entries");
  if ((plan.pi.array() < -tol).any()) throw PreconditionError("plan has negative entries");
  const Vector rows = plan.pi.rowwise().sum();
  if ((rows - prob.p).cwiseAbs().maxCoeff() > tol) {
    throw PreconditionError("plan row sums differ from p");
  }
  if (plan.coupled) {
    const Vector cols = plan.pi.colwise().sum().transpose();
    if ((cols - prob.q).cwiseAbs().maxCoeff() > tol) {
      throw PreconditionError("plan column sums differ from q");
    }
  }
}

double eval_F_G(const Matrix& pi, const DiscreteProblem& prob) {
  require_shape(pi, prob);
  const Matrix Qn = class_targets(prob);
  const Matrix M = class_mass(pi, prob);
  double total = 0.0;
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(prob.num_classes); ++n) {
    const double a = prob.alpha(n);
    if (a <= 0.0) continue;
    const Eigen::RowVectorXd d = M.row(n) / a - Qn.row(n);
    total += -0.5 * a * d.dot(d * prob.dist_y);
  }
  return total;
}

double eval_R_l(const Matrix& pi, const DiscreteProblem& prob) {
  require_shape(pi, prob);
  double total = 0.0;
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    if (prob.p(i) <= 0.0) continue;
    total += pi.row(i).dot(pi.row(i) * prob.dist_y) / prob.p(i);
  }
  return -0.5 * total;
}

double eval_F(const Matrix& pi, const DiscreteProblem& prob, const Objective& F) {
  double val = eval_F_G(pi, prob);
  if (F.gamma_reg != 0.0) val += F.gamma_reg * eval_R_l(pi, prob);
  return val;
}

Matrix grad_F(const Matrix& pi, const DiscreteProblem& prob, const Objective& F) {
  require_shape(pi, prob);
  const Matrix Qn = class_targets(prob);
  const Matrix M = class_mass(pi, prob);
  Matrix per_class(M.rows(), M.cols());
  for (Eigen::Index n = 0; n < M.rows(); ++n) {
    const double a = prob.alpha(n);
    if (a <= 0.0) {
      per_class.row(n).setZero();
      continue;
    }
    per_class.row(n) = -(M.row(n) / a - Qn.row(n)) * prob.dist_y;
  }
  Matrix G(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    G.row(i) = per_class.row(prob.x_labels[static_cast<std::size_t>(i)]);
    if (F.gamma_reg != 0.0 && prob.p(i) > 0.0) {
      G.row(i) -= F.gamma_reg * (pi.row(i) * prob.dist_y) / prob.p(i);
    }
  }
  return G;
}

double rho_l_sq(const Matrix& pi1, const Matrix& pi2, const DiscreteProblem& prob) {
  require_shape(pi1, prob);
  require_shape(pi2, prob);
  const Vector r1 = pi1.rowwise().sum(), r2 = pi2.rowwise().sum();
  if ((r1 - r2).cwiseAbs().maxCoeff() > 1e-9) {
    throw PreconditionError("rho_l: plans have different row weights");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < pi1.rows(); ++i) {
    if (prob.p(i) <= 0.0) continue;
    const Eigen::RowVectorXd d = pi1.row(i) - pi2.row(i);
    total -= d.dot(d * prob.dist_y) / prob.p(i);
  }
  return total;
}

double rho_l(const Matrix& pi1, const Matrix& pi2, const DiscreteProblem& prob) {
  return std::sqrt(std::max(0.0, rho_l_sq(pi1, pi2, prob)));
}

double lagrangian(const Vector& v, const Matrix& pi, const DiscreteProblem& prob,
                  const Objective& F) {
  if (v.size() != pi.cols()) throw DimensionError("lagrangian: v must have N_y entries");
  const Vector cols = pi.colwise().sum().transpose();
  return eval_F(pi, prob, F) - v.dot(cols) + v.dot(prob.q);
}

Vector project_simplex(const Vector& y, double mass) {
  const Eigen::Index n = y.size();
  if (mass <= 0.0) return Vector::Zero(n);
  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double t = (cumsum - mass) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (y.array() - theta).max(0.0).matrix();
}

Matrix project_rows(const Matrix& pi, const Vector& p) {
  Matrix out(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    out.row(i) = project_simplex(pi.row(i).transpose(), p(i)).transpose();
  }
  return out;
}

Matrix project_coupling(const Matrix& pi, const Vector& p, const Vector& q, double tol,
                        int max_iters) {
  const double nx = static_cast<double>(pi.rows());
  Matrix x = pi;
  Matrix P1 = Matrix::Zero(pi.rows(), pi.cols());
  Matrix P2 = Matrix::Zero(pi.rows(), pi.cols());
  Matrix y;
  for (int it = 0; it < max_iters; ++it) {
    y = project_rows(x + P1, p);
    P1 = x + P1 - y;
    Matrix z = y + P2;
    const Eigen::RowVectorXd fix = (q.transpose() - z.colwise().sum()) / nx;
    z.rowwise() += fix;
    P2 = y + P2 - z;
    const double gap = (z - y).cwiseAbs().maxCoeff();
    x = std::move(z);
    if (gap <= tol) return y;
  }
  const double col_res = (y.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
  if (col_res > 1e-10) {
    throw ConvergenceError("coupling projection did not converge, column residual " +
                           std::to_string(col_res));
  }
  return y;
}

namespace {

// Smallest L with F(y) quadratic: largest eigenvalue of the Hessian restricted
// to directions with zero row sums, by power iteration.
double lipschitz_estimate(const DiscreteProblem& prob, const Objective& F) {
  const Eigen::Index R = prob.X.rows(), C = prob.Y.rows();
  if (C < 2) return 1.0;
  const Matrix zero = Matrix::Zero(R, C);
  const Matrix g0 = grad_F(zero, prob, F);
  Rng rng(12345);
  std::normal_distribution<double> nd;
  Matrix V(R, C);
  for (Eigen::Index k = 0; k < V.size(); ++k) V.data()[k] = nd(rng);
  auto center = [](Matrix& M) {
    const Vector mean = M.rowwise().mean();
    M.colwise() -= mean;
  };
  center(V);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double nrm = V.norm();
    if (nrm == 0.0) break;
    V /= nrm;
    Matrix HV = grad_F(V, prob, F) - g0;
    center(HV);
    const double next = HV.norm();
    V = std::move(HV);
    if (it > 10 && std::abs(next - lambda) <= 1e-10 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::max(1.1 * lambda, 1e-8);
}

struct FistaResult {
  Matrix x;
  int iterations = 0;
  double residual = 0.0;
};

template <class Project, class Value, class Grad>
FistaResult fista(Matrix x0, double L, const Project& proj, const Value& f, const Grad& grad,
                  const SolverOptions& o, const char* what) {
  Matrix x = std::move(x0);
  Matrix y = x;
  double t = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= o.max_iters; ++it) {
    const Matrix g = grad(y);
    const double fy = f(y);
    Matrix x_new;
    for (;;) {
      x_new = proj(y - g / L);
      const Matrix d = x_new - y;
      const double model = fy + (g.array() * d.array()).sum() + 0.5 * L * d.squaredNorm();
      if (f(x_new) <= model + 1e-13 * std::max(1.0, std::abs(fy))) break;
      L *= 2.0;
    }
    residual = L * (y - x_new).cwiseAbs().maxCoeff();
    if (residual <= o.tol) return {std::move(x_new), it, residual};
    // Gradient-based restart: function values stop resolving progress long
    // before the gradient mapping reaches tol.
    if (((y - x_new).array() * (x_new - x).array()).sum() > 0.0) {
      t = 1.0;
      x = x_new;
      y = std::move(x_new);
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = std::move(x_new);
    t = t_new;
  }
  throw ConvergenceError(std::string(what) + " did not converge in " +
                         std::to_string(o.max_iters) + " iterations, gradient mapping " +
                         std::to_string(residual));
}

InnerSolution inner_solve(const Vector& v, const DiscreteProblem& prob, const Objective& F,
                          const SolverOptions& o, const Matrix& start) {
  if (v.size() != prob.Y.rows()) throw DimensionError("v must have N_y entries");
  if (!v.allFinite()) throw PreconditionError("v must be finite");
  const double L = lipschitz_estimate(prob, F);
  auto f = [&](const Matrix& pi) { return lagrangian(v, pi, prob, F); };
  auto grad = [&](const Matrix& pi) {
    Matrix g = grad_F(pi, prob, F);
    g.rowwise() -= v.transpose();
    return g;
  };
  auto proj = [&](const Matrix& pi) { return project_rows(pi, prob.p); };
  FistaResult r = fista(project_rows(start, prob.p), L, proj, f, grad, o, "inf over Pi(P)");
  InnerSolution s;
  s.value = f(r.x);
  s.plan = {std::move(r.x), false};
  s.iterations = r.iterations;
  s.residual = r.residual;
  return s;
}

}  // namespace

PrimalSolution solve_primal(const DiscreteProblem& prob, const Objective& F,
                            const SolverOptions& o) {
  require_finalized(prob);
  if (!(F.gamma_reg >= 0.0)) throw PreconditionError("gamma_reg must be >= 0");
  if (!(o.tol > 0.0)) throw PreconditionError("solver tolerance must be > 0");
  const double L = lipschitz_estimate(prob, F);
  auto f = [&](const Matrix& pi) { return eval_F(pi, prob, F); };
  auto grad = [&](const Matrix& pi) { return grad_F(pi, prob, F); };
  auto proj = [&](const Matrix& pi) { return project_coupling(pi, prob.p, prob.q); };
  FistaResult r = fista(product_plan(prob), L, proj, f, grad, o, "primal solver");
  PrimalSolution s;
  s.cost = f(r.x);
  s.plan = {std::move(r.x), true};
  s.iterations = r.iterations;
  s.residual = r.residual;
  return s;
}

InnerSolution inf_over_Pi_P(const Vector& v, const DiscreteProblem& prob, const Objective& F,
                            const SolverOptions& o) {
  require_finalized(prob);
  return inner_solve(v, prob, F, o, product_plan(prob));
}

DualSolution maximize_dual(const DiscreteProblem& prob, const Objective& F,
                           const PrimalSolution& primal, double tol, int max_iters) {
  require_finalized(prob);
  const Eigen::Index R = prob.X.rows(), C = prob.Y.rows();
  const Matrix& pi = primal.plan.pi;
  const Matrix G = grad_F(pi, prob, F);
  const double thresh = 1e-9 * std::max(1e-300, pi.maxCoeff());

  // u_i + v_j = G_ij on the support of pi*.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> support;
  for (Eigen::Index i = 0; i < R; ++i) {
    for (Eigen::Index j = 0; j < C; ++j) {
      if (pi(i, j) > thresh) support.emplace_back(i, j);
    }
  }
  Matrix A = Matrix::Zero(static_cast<Eigen::Index>(support.size()), R + C);
  Vector rhs(static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto [i, j] = support[k];
    A(static_cast<Eigen::Index>(k), i) = 1.0;
    A(static_cast<Eigen::Index>(k), R + j) = 1.0;
    rhs(static_cast<Eigen::Index>(k)) = G(i, j);
  }
  const Vector uv = A.completeOrthogonalDecomposition().solve(rhs);
  Vector v = uv.tail(C);

  SolverOptions inner;
  InnerSolution cur = inner_solve(v, prob, F, inner, pi);
  DualSolution out;
  double step = 1.0;
  int it = 0;
  for (; it < max_iters; ++it) {
    const Vector grad = prob.q - cur.plan.pi.colwise().sum().transpose();
    if (grad.cwiseAbs().maxCoeff() <= tol) break;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector trial = v + step * grad;
      InnerSolution next = inner_solve(trial, prob, F, inner, cur.plan.pi);
      if (next.value >= cur.value + 0.25 * step * grad.squaredNorm()) {
        v = trial;
        cur = std::move(next);
        step *= 2.0;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  out.v = std::move(v);
  out.value = cur.value;
  out.iterations = it;
  return out;
}

GapReport duality_gaps(const Vector& v_hat, const Matrix& pi_hat, const DiscreteProblem& prob,
                       const Objective& F, const PrimalSolution& primal,
                       const SolverOptions& o) {
  if (!(F.gamma_reg > 0.0)) {
    throw PreconditionError(
        "duality gap bound needs gamma_reg > 0: strong convexity constant beta is undefined");
  }
  validate_plan({pi_hat, false}, prob, 1e-9);
  const InnerSolution inner = inf_over_Pi_P(v_hat, prob, F, o);
  GapReport r;
  r.beta = F.gamma_reg;
  r.eps1 = lagrangian(v_hat, pi_hat, prob, F) - inner.value;
  r.eps2 = primal.cost - inner.value;
  r.rho = rho_l(pi_hat, primal.plan.pi, prob);
  r.bound = std::sqrt(2.0 / r.beta) *
            (std::sqrt(std::max(0.0, r.eps1)) + std::sqrt(std::max(0.0, r.eps2)));
  r.holds = r.rho <= r.bound + kBoundSlack;
  return r;
}

GapReport duality_gaps(const Vector& v_hat, const Matrix& pi_hat, const DiscreteProblem& prob,
                       const Objective& F, const SolverOptions& o) {
  if (!(F.gamma_reg > 0.0)) {
    throw PreconditionError(
        "duality gap bound needs gamma_reg > 0: strong convexity constant beta is undefined");
  }
  return duality_gaps(v_hat, pi_hat, prob, F, solve_primal(prob, F, o), o);
}

double strong_convexity_identity_check(const Matrix& pi1, const Matrix& pi2, double a,
                                       const DiscreteProblem& prob) {
  const Matrix mix = a * pi1 + (1.0 - a) * pi2;
  const double lhs = eval_R_l(mix, prob);
  const double rhs = a * eval_R_l(pi1, prob) + (1.0 - a) * eval_R_l(pi2, prob) -
                     0.5 * a * (1.0 - a) * rho_l_sq(pi1, pi2, prob);
  return std::abs(lhs - rhs);
}

double convexity_check_F_G(const Matrix& pi1, const Matrix& pi2, double a,
                           const DiscreteProblem& prob) {
  const Matrix mix = a * pi1 + (1.0 - a) * pi2;
  return a * eval_F_G(pi1, prob) + (1.0 - a) * eval_F_G(pi2, prob) - eval_F_G(mix, prob);
}

namespace {

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
  std::vector<int> labels(n);
  for (std::size_t k = 0; k < n; ++k) {
    labels[k] = k < classes ? static_cast<int>(k) : pick(rng);
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

Vector random_weights(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> w(0.5, 1.5);
  Vector out(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = w(rng);
  return out / out.sum();
}

}  // namespace

DiscreteProblem random_problem(const InstanceSpec& s, Rng& rng) {
  if (s.min_classes < 1 || s.max_classes < s.min_classes || s.dim < 1) {
    throw PreconditionError("instance spec: invalid class range or dimension");
  }
  std::uniform_int_distribution<std::size_t> nc(s.min_classes, s.max_classes);
  const std::size_t classes = nc(rng);
  const std::size_t lo_x = std::max(classes, s.min_nx), lo_y = std::max(classes, s.min_ny);
  if (s.max_nx < lo_x || s.max_ny < lo_y) {
    throw PreconditionError("instance spec: supports too small for the class count");
  }
  const std::size_t nx = std::uniform_int_distribution<std::size_t>(lo_x, s.max_nx)(rng);
  const std::size_t ny = std::uniform_int_distribution<std::size_t>(lo_y, s.max_ny)(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DiscreteProblem prob;
  prob.num_classes = classes;
  const auto D = static_cast<Eigen::Index>(s.dim);
  prob.X.resize(static_cast<Eigen::Index>(nx), D);
  prob.Y.resize(static_cast<Eigen::Index>(ny), D);
  for (Eigen::Index k = 0; k < prob.X.size(); ++k) prob.X.data()[k] = u(rng);
  for (Eigen::Index k = 0; k < prob.Y.size(); ++k) prob.Y.data()[k] = u(rng);
  prob.x_labels = random_labels(nx, classes, rng);
  prob.y_labels = random_labels(ny, classes, rng);
  prob.p = random_weights(nx, rng);
  prob.q = random_weights(ny, rng);
  prob.finalize();
  return prob;
}

Matrix product_plan(const DiscreteProblem& prob) { return prob.p * prob.q.transpose(); }

Matrix random_plan_P(const DiscreteProblem& prob, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Matrix pi(prob.X.rows(), prob.Y.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) pi(i, j) = e(rng);
    pi.row(i) *= prob.p(i) / pi.row(i).sum();
  }
  return pi;
}

Matrix random_plan_PQ(const DiscreteProblem& prob, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Matrix K(prob.X.rows(), prob.Y.rows());
  for (Eigen::Index k = 0; k < K.size(); ++k) K.data()[k] = e(rng);
  for (int it = 0; it < 100000; ++it) {
    const Vector r = K.rowwise().sum();
    K = (prob.p.cwiseQuotient(r)).asDiagonal() * K;
    const Eigen::RowVectorXd c = K.colwise().sum();
    K = K * (prob.q.transpose().cwiseQuotient(c)).asDiagonal();
    if ((K.rowwise().sum() - prob.p).cwiseAbs().maxCoeff() < 1e-15) break;
  }
  return K;
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

VerifyCase verify_instance(std::size_t instance, double gamma_reg, const InstanceSpec& spec,
                           std::uint64_t seed, const SolverOptions& options) {
  if (!(gamma_reg > 0.0)) {
    throw PreconditionError(
        "duality gap bound needs gamma_reg > 0: strong convexity constant beta is undefined");
  }
  Rng prob_rng(mix_seed(seed, instance));
  const DiscreteProblem prob = random_problem(spec, prob_rng);
  std::uint64_t gbits = 0;
  static_assert(sizeof(gbits) == sizeof(gamma_reg));
  std::memcpy(&gbits, &gamma_reg, sizeof(gbits));
  Rng rng(mix_seed(mix_seed(seed, instance), gbits));

  const Objective F{gamma_reg};
  const PrimalSolution primal = solve_primal(prob, F, options);
  const DualSolution dual = maximize_dual(prob, F, primal);

  VerifyCase out;
  out.instance = instance;
  out.gamma_reg = gamma_reg;
  out.nx = prob.nx();
  out.ny = prob.ny();
  out.num_classes = prob.num_classes;
  out.primal_iterations = primal.iterations;
  out.v_scale = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, 0.0)(rng));
  out.mix = std::uniform_real_distribution<double>(0.0, 0.5)(rng);

  std::normal_distribution<double> nd(0.0, out.v_scale);
  Vector v_hat = dual.v;
  for (Eigen::Index j = 0; j < v_hat.size(); ++j) v_hat(j) += nd(rng);
  const Matrix induced = inf_over_Pi_P(v_hat, prob, F, options).plan.pi;
  const Matrix pi_hat = (1.0 - out.mix) * induced + out.mix * random_plan_P(prob, rng);
  out.gap = duality_gaps(v_hat, pi_hat, prob, F, primal, options);
  return out;
}

}  // namespace got::oracle
