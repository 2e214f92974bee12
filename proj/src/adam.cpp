#include "neurolip/adam.hpp"

#include <cmath>

namespace neurolip {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i]->value;
    const auto& grad = params_[i]->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[j]) / bc1;
      const double vhat = static_cast<double>(v[j]) / bc2;
      value[j] = static_cast<T>(static_cast<double>(value[j]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double step_decay_lr(double base_lr, double factor, int step_epochs, int epoch) {
  if (step_epochs <= 0) return base_lr;
  return base_lr * std::pow(factor, epoch / step_epochs);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace neurolip
