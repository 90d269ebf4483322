#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace otc {

/// Dense row-major matrix of doubles. Sized for the small systems this
/// library assembles (tens of rows at most).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] double trace() const;
  [[nodiscard]] double norm1() const;
  [[nodiscard]] double max_abs() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend std::vector<double> operator*(const Matrix& a, std::span<const double> x);
  friend Matrix operator-(const Matrix& a, const Matrix& b);
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// LU factorization with partial pivoting, P A = L U.
class LuDecomposition {
 public:
  /// Throws `SingularMatrix` when a pivot falls below 1e-14 times the
  /// largest entry of `a`.
  explicit LuDecomposition(Matrix a);

  [[nodiscard]] std::vector<double> solve(std::span<const double> b) const;
  [[nodiscard]] std::vector<double> solve_transposed(std::span<const double> b) const;

  /// Hager-style estimate of ||A^{-1}||_1 * ||A||_1.
  [[nodiscard]] double condition_estimate() const;

  [[nodiscard]] std::size_t size() const noexcept { return lu_.rows(); }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double anorm1_ = 0.0;
};

std::vector<double> lu_solve(const Matrix& a, std::span<const double> b);

double inf_norm(std::span<const double> v);
double inf_norm_diff(std::span<const double> a, std::span<const double> b);

}  // namespace otc
