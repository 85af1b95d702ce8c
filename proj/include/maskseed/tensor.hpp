#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maskseed/errors.hpp"

namespace maskseed {

// Dense n-dimensional array, row-major, contiguous. float for production
// paths, double for gradient checks.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  Tensor(std::vector<int> s, T fill) : shape(std::move(s)), data(numel_of(shape), fill) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ConfigError("tensor dimension must be positive, got " + std::to_string(d));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  // C×H×W indexing
  T& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + static_cast<std::size_t>(y)) * shape[2] + x];
  }
  const T& at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + static_cast<std::size_t>(y)) * shape[2] + x];
  }

  // O×I×Kh×Kw indexing
  T& at4(int o, int i, int y, int x) {
    return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
  }
  const T& at4(int o, int i, int y, int x) const {
    return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

template <class T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <class T>
void require_finite(const Tensor<T>& t, const char* where) {
  if (!all_finite(t)) throw NumericError(std::string("non-finite values in ") + where);
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.resize(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

}  // namespace maskseed
