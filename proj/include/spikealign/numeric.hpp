// include/spikealign/numeric.hpp

// Copyright 2026 The spikealign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPIKEALIGN_NUMERIC_HPP_
#define SPIKEALIGN_NUMERIC_HPP_

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace spikealign {

// log(0) sentinel. All lattice code stores log-domain doubles and must
// propagate this value without producing NaN.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) with max subtraction.
inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

inline double log_add(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

// Dense row-major matrix of doubles. Disk tensors are float32; everything
// in memory accumulates in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  const double* row(int r) const {
    return data_.data() + static_cast<std::size_t>(r) * cols_;
  }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Dense rank-3 array, row-major over (d0, d1, d2).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2),
        data_(static_cast<std::size_t>(d0) * d1 * d2, fill) {}

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }

  double& operator()(int i, int j, int k) {
    assert(i >= 0 && i < d0_ && j >= 0 && j < d1_ && k >= 0 && k < d2_);
    return data_[(static_cast<std::size_t>(i) * d1_ + j) * d2_ + k];
  }
  double operator()(int i, int j, int k) const {
    assert(i >= 0 && i < d0_ && j >= 0 && j < d1_ && k >= 0 && k < d2_);
    return data_[(static_cast<std::size_t>(i) * d1_ + j) * d2_ + k];
  }

  const double* row(int i, int j) const {
    return data_.data() + (static_cast<std::size_t>(i) * d1_ + j) * d2_;
  }
  double* row(int i, int j) {
    return data_.data() + (static_cast<std::size_t>(i) * d1_ + j) * d2_;
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> data_;
};

// out[i] = in[i] - log sum_j exp(in[j]); out may alias in.
inline void log_softmax(const double* in, int n, double* out) {
  double mx = in[0];
  for (int i = 1; i < n; ++i) mx = in[i] > mx ? in[i] : mx;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(in[i] - mx);
  const double lse = mx + std::log(sum);
  for (int i = 0; i < n; ++i) out[i] = in[i] - lse;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace spikealign

#endif  // SPIKEALIGN_NUMERIC_HPP_
