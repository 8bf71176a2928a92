#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"

namespace prunekit {

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense n-dimensional array with an optional same-shape gradient slot.
// Data is row-major; activations use [N][C][H][W], conv weights
// [out][in][kh][kw], dense weights [out][in].
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty when absent, otherwise data.size()

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(shape_product(shape), T(0));
  }

  Tensor(std::vector<std::size_t> s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_product(shape)) {
      fail(ErrorCategory::shape, "tensor data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_str(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (has_grad()) grad.assign(data.size(), T(0));
  }
  void drop_grad() { grad.clear(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
  if (!all_finite(std::span<const T>(t.data))) {
    fail(ErrorCategory::numeric, "non-finite value in " + where);
  }
}

}  // namespace prunekit
