#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "got/autodiff.hpp"
#include "got/tensor.hpp"

namespace got {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(std::span<Tensor* const> params, const AdamOptions& options = {});

// One bias-corrected Adam update. Gradients are read, not cleared.
void adam_step(std::span<Tensor* const> params, AdamState& state);

void zero_grads(std::span<Tensor* const> params);

/// Builds a scalar loss on the given graph; parameters must enter through
/// `Graph::leaf` so their gradients are collected.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
};

struct GradCheckEntry {
  std::size_t param = 0;
  std::size_t index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
};

// Autodiff and central-difference derivative for every coordinate.
std::vector<GradCheckEntry> finite_difference_table(const LossBuilder& loss,
                                                    std::span<Tensor* const> params,
                                                    double h = 1e-5);

// |autodiff - numeric| / (|numeric| + 1e-8).
double relative_error(double autodiff, double numeric);

// max over coordinates of |autodiff - central difference| / (|central| + 1e-8).
// Existing gradients on `params` are preserved.
GradCheckResult finite_difference_check(const LossBuilder& loss,
                                        std::span<Tensor* const> params,
                                        double h = 1e-5);

}  // namespace got
