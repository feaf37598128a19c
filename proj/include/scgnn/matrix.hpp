#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace scgnn {

/// Dense row-major matrix with value semantics.
template <typename T> class Matrix {
public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T &operator()(std::size_t r, std::size_t c) noexcept {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T &operator()(std::size_t r, std::size_t c) const noexcept {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  T *data() noexcept { return data_.data(); }
  const T *data() const noexcept { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Reshapes to rows x cols filled with zero, reusing the allocation.
  void assign_zero(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, T{});
  }

  bool operator==(const Matrix &) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

/// out = a * b
template <typename T>
void matmul(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &out) {
  assert(a.cols() == b.rows());
  out.assign_zero(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T *o = out.data() + i * m;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T{})
        continue;
      const T *br = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j)
        o[j] += aik * br[j];
    }
  }
}

/// out = a^T * b
template <typename T>
void matmul_tn(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &out) {
  assert(a.rows() == b.rows());
  out.assign_zero(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T *br = b.data() + r * m;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ari = a(r, i);
      if (ari == T{})
        continue;
      T *o = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j)
        o[j] += ari * br[j];
    }
  }
}

/// out = a * b^T
template <typename T>
void matmul_nt(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &out) {
  assert(a.cols() == b.cols());
  out.assign_zero(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      T s{};
      for (std::size_t k = 0; k < ar.size(); ++k)
        s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
}

} // namespace scgnn
