#include "got/optim.hpp"

#include <cmath>
#include <string>

#include "got/errors.hpp"

namespace got {

AdamState make_adam_state(std::span<Tensor* const> params, const AdamOptions& options) {
  AdamState s;
  s.lr = options.lr;
  s.beta1 = options.beta1;
  s.beta2 = options.beta2;
  s.eps = options.eps;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->has_grad()) {
      throw PreconditionError("adam_step: parameter " + std::to_string(k) +
                              " has no gradient");
    }
    if (state.m[k].size() != params[k]->size()) {
      throw DimensionError("adam_step: moment buffer shape mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto data = params[k]->data();
    auto grad = params[k]->grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      data[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void zero_grads(std::span<Tensor* const> params) {
  for (Tensor* p : params) p->zero_grad();
}

std::vector<GradCheckEntry> finite_difference_table(const LossBuilder& loss,
                                                    std::span<Tensor* const> params,
                                                    double h) {
  std::vector<std::vector<double>> saved;
  for (Tensor* p : params) {
    if (!p->requires_grad()) p->set_requires_grad(true);
    saved.emplace_back(p->grad().begin(), p->grad().end());
    p->zero_grad();
  }

  {
    Graph g;
    Var out = loss(g);
    g.backward(out);
  }
  std::vector<std::vector<double>> analytic;
  for (Tensor* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());

  auto evaluate = [&] {
    Graph g;
    return loss(g).item();
  };

  std::vector<GradCheckEntry> table;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto data = params[k]->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = evaluate();
      data[i] = orig - h;
      const double down = evaluate();
      data[i] = orig;
      table.push_back({k, i, analytic[k][i], (up - down) / (2.0 * h)});
    }
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto grad = params[k]->grad();
    std::copy(saved[k].begin(), saved[k].end(), grad.begin());
  }
  return table;
}

double relative_error(double autodiff, double numeric) {
  return std::abs(autodiff - numeric) / (std::abs(numeric) + 1e-8);
}

GradCheckResult finite_difference_check(const LossBuilder& loss,
                                        std::span<Tensor* const> params,
                                        double h) {
  GradCheckResult result;
  bool first = true;
  for (const GradCheckEntry& e : finite_difference_table(loss, params, h)) {
    const double err = relative_error(e.autodiff, e.numeric);
    if (first || err > result.max_rel_err) {
      result = {err, e.param, e.index, e.autodiff, e.numeric};
      first = false;
    }
  }
  return result;
}

}  // namespace got
