#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nssm {

/// Raised on dimension disagreements between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN/Inf or leaves its domain.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. The only storage type the engine
/// knows about; vectors are n x 1, scalars 1 x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension");
  }

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix constant(int rows, int cols, double v) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = v;
    return m;
  }
  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  /// Column vector from an initializer-style list.
  static Matrix col(const std::vector<double>& v) {
    Matrix m(static_cast<int>(v.size()), 1);
    m.data_ = v;
    return m;
  }
  static Matrix scalar(double v) { return constant(1, 1, v); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// FNV-1a over the raw bytes of the value buffer; used for golden-run
/// regression checks where byte stability is the contract.
inline uint64_t fnv1a_bytes(const Matrix& m) {
  const auto* p = reinterpret_cast<const unsigned char*>(m.data());
  size_t n = m.size() * sizeof(double);
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace nssm
