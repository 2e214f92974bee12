#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "neurolip/error.hpp"
#include "neurolip/rng.hpp"

namespace neurolip {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor with at most four axes. Image tensors use the
/// N x C x H x W layout; per-sample vectors use N x L.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    if (shape_.size() > 4) throw Error("tensor rank above 4: " + shape_string(shape_));
    data_.assign(shape_size(shape_), fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    assert(rank() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    assert(rank() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  /// Pointer to the contiguous H*W plane of (n, c) in a rank-4 tensor.
  T* plane(std::size_t n, std::size_t c) noexcept { return data_.data() + (n * shape_[1] + c) * shape_[2] * shape_[3]; }
  const T* plane(std::size_t n, std::size_t c) const noexcept {
    return data_.data() + (n * shape_[1] + c) * shape_[2] * shape_[3];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) throw Error("reshape size mismatch");
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.zero(); }
};

/// Uniform in +-sqrt(1/fan_in).
template <typename T>
void init_uniform_fan_in(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : t.vec()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
}

/// Named view over a model's state, used by the optimizer and checkpoints.
template <typename T>
struct StateRefs {
  std::vector<Parameter<T>*> params;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers;
};

}  // namespace neurolip
