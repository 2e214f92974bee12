#include "neurolip/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace neurolip {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check(const std::vector<Parameter<double>*>& params, const std::function<double()>& loss,
                           const std::function<void()>& backward, const GradCheckOptions& opts) {
  backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi]->value;
    const std::size_t n = value.size();
    const std::size_t stride = (opts.max_per_tensor == 0 || n <= opts.max_per_tensor)
                                   ? 1
                                   : (n + opts.max_per_tensor - 1) / opts.max_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = value[i];
      value[i] = saved + opts.step;
      const double up = loss();
      value[i] = saved - opts.step;
      const double down = loss();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double err = relative_error(analytic[pi][i], numeric);
      ++result.coordinates;
      if (result.worst_name.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_name = params[pi]->name;
        result.worst_index = i;
        result.worst_analytic = analytic[pi][i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace neurolip
