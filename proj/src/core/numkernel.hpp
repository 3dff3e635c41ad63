#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace geoconcept {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 matrices, or
// plain spans where a matrix would only add noise.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix column_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  void fill(double value);
  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

// a * b. Inner-dimension sums run left to right, so results are reproducible
// bit for bit.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double sum_squares(std::span<const double> a);
// In-place L2 normalization; returns the original norm. Zero vectors stay zero.
double normalize_in_place(std::span<double> a);
double cosine(std::span<const double> a, std::span<const double> b);

using ScalarFn = std::function<double(const Matrix&)>;

// Central differences (f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps).
Matrix finite_diff_grad(const ScalarFn& loss_fn, const Matrix& theta, double eps);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param_index = 0;
  bool passed = true;
};

// Per-coordinate |a - n| / max(|a|, |n|, 1e-12), maximized.
GradCheckReport grad_check(const Matrix& analytic, const Matrix& numeric, double tol);

}  // namespace geoconcept
