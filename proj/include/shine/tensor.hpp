#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "shine/errors.hpp"

namespace shine {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1, scalars 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative tensor extent");
    v_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  }

  static Tensor full(int rows, int cols, double value) {
    Tensor t(rows, cols);
    for (auto& x : t.v_) x = value;
    return t;
  }

  static Tensor row(std::initializer_list<double> xs) {
    Tensor t(1, static_cast<int>(xs.size()));
    int j = 0;
    for (double x : xs) t.v_[j++] = x;
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_str() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
  }

  void fill(double value) {
    for (auto& x : v_) x = value;
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double max_abs_diff(const Tensor& o) const {
    if (!same_shape(o)) throw DimensionError("max_abs_diff: " + shape_str() + " vs " + o.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) m = std::max(m, std::fabs(v_[i] - o.v_[i]));
    return m;
  }

  bool operator==(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace shine
