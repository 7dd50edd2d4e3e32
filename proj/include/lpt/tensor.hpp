#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpt/rng.hpp"

namespace lpt {

// Dense row-major matrix of doubles. Everything in the library is rank 1 or 2;
// vectors are represented as (1 x n) or (n x 1) as context demands.
class Tensor {
 public:
  Tensor() : rows_(0), cols_(0) {}
  Tensor(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Tensor(std::size_t rows, std::size_t cols, double fill)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor row(std::initializer_list<double> v) {
    return Tensor(1, v.size(), std::vector<double>(v));
  }

  static Tensor randn(std::size_t rows, std::size_t cols, RngStream& rng,
                      double scale = 1.0) {
    Tensor t(rows, cols);
    rng.fill_normal(t.data(), t.size());
    if (scale != 1.0)
      for (auto& x : t.data_) x *= scale;
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Scalar access for (1 x 1) results.
  double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data_[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  std::string shape_str() const {
    return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")";
  }

  using Map = Eigen::Map<
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                  Eigen::Dynamic, Eigen::RowMajor>>;

  Map map() { return Map(data(), static_cast<Eigen::Index>(rows_),
                         static_cast<Eigen::Index>(cols_)); }
  ConstMap map() const {
    return ConstMap(data(), static_cast<Eigen::Index>(rows_),
                    static_cast<Eigen::Index>(cols_));
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

// out = op(a) * op(b), where op is optional transposition. Accumulates into
// out when accumulate is set (used by backward passes).
inline void matmul_into(const Tensor& a, bool ta, const Tensor& b, bool tb,
                        Tensor& out, bool accumulate = false) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t k2 = tb ? b.cols() : b.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  if (k != k2)
    throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " +
                                b.shape_str());
  if (out.rows() != m || out.cols() != n) {
    if (accumulate) throw std::invalid_argument("matmul: bad accumulate shape");
    out = Tensor(m, n);
  }
  auto A = a.map();
  auto B = b.map();
  auto O = out.map();
  if (!ta && !tb) {
    if (accumulate) O.noalias() += A * B; else O.noalias() = A * B;
  } else if (ta && !tb) {
    if (accumulate) O.noalias() += A.transpose() * B; else O.noalias() = A.transpose() * B;
  } else if (!ta && tb) {
    if (accumulate) O.noalias() += A * B.transpose(); else O.noalias() = A * B.transpose();
  } else {
    if (accumulate) O.noalias() += A.transpose() * B.transpose();
    else O.noalias() = A.transpose() * B.transpose();
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false,
                     bool tb = false) {
  Tensor out;
  matmul_into(a, ta, b, tb, out);
  return out;
}

}  // namespace lpt
