#pragma once

// Finite-difference checks of every differentiable building block and of the
// assembled pipeline, in double precision.

#include <string>
#include <vector>

#include "neurolip/gradcheck.hpp"

namespace neurolip {

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradSentinelThreshold = 1e-2;

struct GradCase {
  std::string name;
  GradCheckResult result;
  bool passed() const { return result.max_rel_error < kGradTolerance; }
};

std::vector<GradCase> gradient_suite(const GradCheckOptions& opts = {});

/// Pointwise convolution with its weight gradient deliberately scaled by 1.1;
/// a working checker must report an error above kGradSentinelThreshold.
GradCase corrupted_backward_sentinel();

}  // namespace neurolip
