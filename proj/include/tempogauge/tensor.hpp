#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "tempogauge/errors.hpp"
#include "tempogauge/threading.hpp"

namespace tempogauge::nn {

// Dense row-major tensor. float for the production model, double for
// finite-difference gradient checks.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), T(0)) {}
  Tensor(std::vector<std::size_t> shape, T fill)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != data_.size()) {
      throw ShapeError("reshape: element count mismatch");
    }
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// c[m,n] = a[m,k] b[k,n] (+= when accumulate). Row-partitioned across
// threads; the k loop is never split, so sums are bit-stable for any
// job count.
template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate = false) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* crow = c + i * n;
      if (!accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
      }
      const T* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        T av = arow[p];
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// c[m,n] = a^T b for a[k,m], b[k,n]. Used for weight gradients.
template <class T>
void matmul_at_b(const T* a, const T* b, T* c, std::size_t k, std::size_t m,
                 std::size_t n, bool accumulate = false) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* crow = c + i * n;
      if (!accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
      }
      for (std::size_t p = 0; p < k; ++p) {
        T av = a[p * m + i];
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// c[m,n] = a b^T for a[m,k], b[n,k]. Used to push gradients back through
// a weight matrix.
template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate = false) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const T* arow = a + i * k;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        if (accumulate) {
          crow[j] += acc;
        } else {
          crow[j] = acc;
        }
      }
    }
  });
}

}  // namespace tempogauge::nn
