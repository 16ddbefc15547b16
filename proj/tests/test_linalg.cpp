#include <Eigen/Dense>
#include <chrono>
#include <cmath>

#include "doctest.h"
#include "invrender/error.hpp"
#include "invrender/linalg.hpp"
#include "test_support.hpp"

using namespace invrender;
using invrender::testing::random_matrix;
using invrender::testing::relative_frobenius;

namespace {

Matrix reconstruct(const SvdResult& s) {
  Matrix us = s.u;
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t j = 0; j < s.rank; ++j) us(i, j) *= s.sigma[j];
  }
  return multiply(us, transpose(s.v));
}

double orthonormality_error(const Matrix& q) {
  return max_abs(multiply_at_b(q, q) - Matrix::identity(q.cols()));
}

// Independent route to singular values: Eigen's two-sided Jacobi.
std::vector<double> eigen_singular_values(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> solver(e);
  const auto& s = solver.singularValues();
  return {s.data(), s.data() + s.size()};
}

}  // namespace

TEST_CASE("svd of the identity") {
  const SvdResult s = svd(Matrix::identity(3));
  REQUIRE(s.rank == 3);
  for (double v : s.sigma) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(max_abs(multiply(s.u, transpose(s.v)) - Matrix::identity(3)) < 1e-14);
}

TEST_CASE("svd drops zero singular values") {
  const double diag[] = {3.0, 0.0, 1.0};
  const SvdResult s = svd(Matrix::diagonal(diag));
  REQUIRE(s.rank == 2);
  CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(s.sigma[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("svd of a shear matches the hand-solved spectrum") {
  // Eigenvalues of MᵀM = [[1,1],[1,2]] are (3 ± √5)/2.
  const SvdResult s = svd(Matrix::from_rows({{1, 1}, {0, 1}}));
  REQUIRE(s.rank == 2);
  CHECK(s.sigma[0] == doctest::Approx(1.618033988749895).epsilon(1e-14));
  CHECK(s.sigma[1] == doctest::Approx(0.6180339887498949).epsilon(1e-14));
}

TEST_CASE("svd rejects empty and non-finite input") {
  CHECK_THROWS_AS(svd(Matrix()), Error);
  Matrix m = Matrix::identity(2);
  m(0, 1) = std::nan("");
  try {
    svd(m);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("svd of the zero matrix has rank zero") {
  const SvdResult s = svd(Matrix(4, 3));
  CHECK(s.rank == 0);
  CHECK(s.u.cols() == 0);
  CHECK(s.v.rows() == 3);
}

TEST_CASE("svd on random shapes: factorization, orthonormality, Eigen agreement") {
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t seed = 1;
  for (std::size_t rows : {1u, 2u, 5u, 13u, 20u, 30u}) {
    for (std::size_t cols : {1u, 3u, 7u, 20u, 30u}) {
      const Matrix m = random_matrix(rows, cols, seed++);
      const SvdResult s = svd(m);
      CAPTURE(rows);
      CAPTURE(cols);
      CHECK(s.rank == std::min(rows, cols));
      CHECK(frobenius_norm(reconstruct(s) - m) / frobenius_norm(m) <= 1e-10);
      CHECK(orthonormality_error(s.u) <= 1e-10);
      CHECK(orthonormality_error(s.v) <= 1e-10);
      for (std::size_t j = 1; j < s.rank; ++j) CHECK(s.sigma[j - 1] >= s.sigma[j]);
      const auto ref = eigen_singular_values(m);
      for (std::size_t j = 0; j < s.rank; ++j) CHECK(std::abs(s.sigma[j] - ref[j]) <= 1e-12 * ref[0]);
    }
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("svd takes the Gram-preconditioned path for wide inputs") {
  const Matrix m = random_matrix(60, 150, 77);
  const SvdResult s = svd(m);
  CHECK(s.rank == 60);
  CHECK(frobenius_norm(reconstruct(s) - m) / frobenius_norm(m) <= 1e-10);
  CHECK(orthonormality_error(s.u) <= 1e-10);
  CHECK(orthonormality_error(s.v) <= 1e-10);
  const auto ref = eigen_singular_values(m);
  for (std::size_t j = 0; j < s.rank; ++j) CHECK(std::abs(s.sigma[j] - ref[j]) <= 1e-12 * ref[0]);
}

TEST_CASE("svd handles rank-deficient Gram-path inputs") {
  // 80 x 50 of rank 12
  const Matrix m = multiply(random_matrix(80, 12, 5), random_matrix(12, 50, 6));
  const SvdResult s = svd(m);
  CHECK(s.rank == 12);
  CHECK(relative_frobenius(reconstruct(s), m) <= 1e-10);
  CHECK(orthonormality_error(s.u) <= 1e-10);
}

TEST_CASE("svd sign convention is deterministic") {
  const Matrix m = random_matrix(9, 6, 3);
  const SvdResult a = svd(m);
  const SvdResult b = svd(m);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(a.sigma == b.sigma);
  for (std::size_t j = 0; j < a.rank; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.u.rows(); ++i)
      if (std::abs(a.u(i, j)) > std::abs(a.u(best, j))) best = i;
    CHECK(a.u(best, j) >= 0.0);
  }
  // Negating the input flips v, not u.
  const SvdResult n = svd(-1.0 * m);
  CHECK(max_abs(n.u - a.u) < 1e-12);
  CHECK(max_abs(n.v + a.v) < 1e-12);
}

TEST_CASE("symmetric_eigen recovers a known spectrum") {
  const Matrix q = svd(random_matrix(6, 6, 11)).u;
  const double vals[] = {5.0, 3.0, 2.0, 1.0, 0.5, -1.0};
  const Matrix a = multiply(multiply(q, Matrix::diagonal(vals)), transpose(q));
  const SymmetricEigen e = symmetric_eigen(a);
  for (std::size_t i = 0; i < 6; ++i) CHECK(e.values[i] == doctest::Approx(vals[i]).epsilon(1e-12));
  CHECK(orthonormality_error(e.vectors) < 1e-12);
}

TEST_CASE("pseudo_inverse examples") {
  CHECK(max_abs(pseudo_inverse(Matrix::identity(3)) - Matrix::identity(3)) < 1e-15);
  const double d[] = {2.0, 0.0};
  const Matrix p = pseudo_inverse(Matrix::diagonal(d));
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 1) == 0.0);
  // (AᵀA)⁻¹Aᵀ for a = [1;1] is [1/2, 1/2].
  const Matrix col = pseudo_inverse(Matrix::from_rows({{1}, {1}}));
  REQUIRE(col.rows() == 1);
  REQUIRE(col.cols() == 2);
  CHECK(col(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(col(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("pseudo_inverse satisfies the Penrose conditions") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // rank-deficient: 12 x 9 of rank 5
    const Matrix a = multiply(random_matrix(12, 5, 100 + seed), random_matrix(5, 9, 200 + seed));
    const Matrix p = pseudo_inverse(a);
    CHECK(relative_frobenius(multiply(multiply(a, p), a), a) <= 1e-8);
    CHECK(relative_frobenius(multiply(multiply(p, a), p), p) <= 1e-8);
    const Matrix ap = multiply(a, p);
    const Matrix pa = multiply(p, a);
    CHECK(relative_frobenius(transpose(ap), ap) <= 1e-8);
    CHECK(relative_frobenius(transpose(pa), pa) <= 1e-8);
  }
}

TEST_CASE("least_squares examples") {
  const Matrix x = least_squares(Matrix::identity(3), 2.0 * Matrix::identity(3));
  CHECK(max_abs(x - 2.0 * Matrix::identity(3)) < 1e-14);

  const Matrix s = least_squares(Matrix::from_rows({{1, 2, 3}}), Matrix::from_rows({{2, 4, 6}}));
  REQUIRE(s.rows() == 1);
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-14));

  // a⁺ = [[1/2, 0], [1/2, 0]] by hand, so b·a⁺ = [[1, 0], [1, 0]].
  const Matrix mn = least_squares(Matrix::from_rows({{1, 1}, {0, 0}}), Matrix::from_rows({{1, 1}, {1, 1}}));
  CHECK(max_abs(mn - Matrix::from_rows({{1, 0}, {1, 0}})) < 1e-14);

  CHECK_THROWS_AS(least_squares(Matrix(2, 3), Matrix(2, 4)), Error);
}

TEST_CASE("least_squares residual is locally minimal") {
  std::mt19937_64 rng(9);
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const Matrix a = random_matrix(4, 15, 300 + inst);
    const Matrix b = random_matrix(3, 15, 400 + inst);
    const Matrix x = least_squares(a, b);
    const double best = frobenius_norm(b - multiply(x, a));
    for (int trial = 0; trial < 100; ++trial) {
      Matrix delta(x.rows(), x.cols());
      for (double& v : delta.data()) v = invrender::testing::uniform(rng);
      const Matrix perturbed = x + 1e-3 * delta;
      CHECK(best <= frobenius_norm(b - multiply(perturbed, a)));
    }
  }
}
