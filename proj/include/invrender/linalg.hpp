#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace invrender {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Samples are stored as columns throughout
// the library (an image dataset is D x n).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  // Builds a matrix whose columns are the given equally sized vectors.
  static Matrix from_columns(const std::vector<Vector>& columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  // Keeps the first `count` columns.
  Matrix leading_columns(std::size_t count) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& m);
Matrix multiply(const Matrix& a, const Matrix& b);
// aᵀ·b without materializing the transpose.
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
// a·bᵀ
Matrix multiply_a_bt(const Matrix& a, const Matrix& b);
Vector multiply(const Matrix& a, std::span<const double> x);
// aᵀ·x
Vector multiply_transposed(const Matrix& a, std::span<const double> x);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double dot(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> values);

// Relative threshold below which singular values count as zero.
inline constexpr double kRankTolerance = 1e-10;

struct SvdResult {
  Matrix u;            // m x r, orthonormal columns
  Vector sigma;        // r values, descending, > kRankTolerance * sigma_max
  Matrix v;            // n x r, orthonormal columns
  std::size_t rank = 0;
};

// Thin SVD truncated at the effective rank. Signs are fixed so that the
// largest-magnitude entry of every u column is non-negative (lowest index wins
// ties), which makes the result reproducible bit for bit.
SvdResult svd(const Matrix& m);

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns are unit eigenvectors
};

// Householder tridiagonalization followed by implicit QL.
SymmetricEigen symmetric_eigen(const Matrix& m);

Matrix pseudo_inverse(const Matrix& m);

// Minimum-norm X minimizing ‖b − X·a‖_F; a is k x n, b is k' x n, X is k' x k.
Matrix least_squares(const Matrix& a, const Matrix& b);

// The same solution as left·right with left = b·V·Σ⁻¹ (k' x r) and right = Uᵀ
// (r x k), r = rank(a). Cheaper to store and apply when k' and k are both
// much larger than r.
struct LeastSquaresFactors {
  Matrix left;
  Matrix right;
};
LeastSquaresFactors least_squares_factors(const Matrix& a, const Matrix& b);

}  // namespace invrender
