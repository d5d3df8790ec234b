#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "got/optim.hpp"

namespace got {

struct GradcheckOutcome {
  std::string component;
  GradCheckResult result;
  bool passed = false;
};

// Names of every registered differentiable loss.
std::vector<std::string> gradcheck_components();

// Builds the named loss on small random inputs (fixed by seed) and compares
// autodiff against central differences. Unknown names raise ConfigError.
GradcheckOutcome run_gradcheck(const std::string& component, std::uint64_t seed,
                               double h = 1e-5, double tol = 1e-4);

}  // namespace got
