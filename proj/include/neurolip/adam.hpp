#pragma once

#include <cstdint>
#include <vector>

#include "neurolip/tensor.hpp"

namespace neurolip {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are allocated lazily on the first step
/// and keyed by position in the parameter list, so the list must not change
/// between steps.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Parameter<T>*> params, AdamConfig cfg = {});

  void step();
  void zero_grad();

  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  double lr() const noexcept { return cfg_.lr; }
  std::uint64_t step_count() const noexcept { return t_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t t_ = 0;
};

/// Learning rate after `epoch` completed epochs under a step decay schedule.
double step_decay_lr(double base_lr, double factor, int step_epochs, int epoch);

}  // namespace neurolip
