#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/error.hpp"

namespace sketchspec {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Real dense matrix with at least one row and one column and only finite
/// entries. Values are immutable once built; the row-major entry order is the
/// logical layout used by every serializer.
class DenseMatrix {
 public:
  /// rows x cols zero matrix.
  DenseMatrix(std::size_t rows, std::size_t cols) {
    check_dims(rows, cols);
    data_ = RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }

  DenseMatrix(std::size_t rows, std::size_t cols, std::span<const double> row_major) {
    check_dims(rows, cols);
    if (row_major.size() != rows * cols) {
      throw ShapeError("entry count " + std::to_string(row_major.size()) + " != " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    data_ = Eigen::Map<const RowMatrix>(row_major.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(cols));
    check_finite();
  }

  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    check_dims(n, m);
    data_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    Eigen::Index i = 0;
    for (const auto& row : rows) {
      if (row.size() != m) throw ShapeError("ragged initializer list");
      Eigen::Index j = 0;
      for (double v : row) data_(i, j++) = v;
      ++i;
    }
    check_finite();
  }

  /// Adopts any Eigen expression; rejects empty shapes and non-finite entries.
  template <typename Derived>
  explicit DenseMatrix(const Eigen::MatrixBase<Derived>& expr) : data_(expr) {
    check_dims(static_cast<std::size_t>(data_.rows()), static_cast<std::size_t>(data_.cols()));
    check_finite();
  }

  explicit DenseMatrix(RowMatrix&& storage) : data_(std::move(storage)) {
    check_dims(static_cast<std::size_t>(data_.rows()), static_cast<std::size_t>(data_.cols()));
    check_finite();
  }

  static DenseMatrix identity(std::size_t n) {
    return DenseMatrix(RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  }

  static DenseMatrix diagonal(std::span<const double> diag) {
    RowMatrix d = RowMatrix::Zero(static_cast<Eigen::Index>(diag.size()),
                                  static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) d(Eigen::Index(i), Eigen::Index(i)) = diag[i];
    return DenseMatrix(std::move(d));
  }

  static DenseMatrix diagonal(std::initializer_list<double> diag) {
    return diagonal(std::span<const double>(diag.begin(), diag.size()));
  }

  static DenseMatrix column(const Vector& v) { return DenseMatrix(RowMatrix(v)); }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  std::size_t size() const noexcept { return rows() * cols(); }

  double operator()(std::size_t i, std::size_t j) const {
    return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  const RowMatrix& eigen() const noexcept { return data_; }

  std::span<const double> entries() const noexcept { return {data_.data(), size()}; }

  DenseMatrix transpose() const { return DenseMatrix(RowMatrix(data_.transpose())); }

  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
      throw ShapeError("product of " + a.shape_string() + " and " + b.shape_string());
    }
    return DenseMatrix(RowMatrix(a.data_ * b.data_));
  }

  friend DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    a.require_same_shape(b);
    return DenseMatrix(RowMatrix(a.data_ + b.data_));
  }

  friend DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    a.require_same_shape(b);
    return DenseMatrix(RowMatrix(a.data_ - b.data_));
  }

  friend DenseMatrix operator*(double s, const DenseMatrix& a) {
    return DenseMatrix(RowMatrix(s * a.data_));
  }

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.data_ == b.data_;
  }

  std::string shape_string() const { return std::to_string(rows()) + "x" + std::to_string(cols()); }

 private:
  static void check_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
  }

  void check_finite() const {
    if (!data_.allFinite()) throw InvalidArgument("matrix has non-finite entries");
  }

  void require_same_shape(const DenseMatrix& other) const {
    if (rows() != other.rows() || cols() != other.cols()) {
      throw ShapeError("shape mismatch " + shape_string() + " vs " + other.shape_string());
    }
  }

  RowMatrix data_;
};

}  // namespace sketchspec
