#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "neurolip/tensor.hpp"

namespace neurolip {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates checked per tensor; 0 checks all, otherwise an evenly strided subset.
  std::size_t max_per_tensor = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Central-difference check of `backward` against `loss`. `backward` must zero
/// and refill the grads of `params` for the current values; `loss` evaluates the
/// scalar objective. Error per coordinate is |a - n| / max(1e-12, |a| + |n|).
GradCheckResult grad_check(const std::vector<Parameter<double>*>& params, const std::function<double()>& loss,
                           const std::function<void()>& backward, const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric);

}  // namespace neurolip
