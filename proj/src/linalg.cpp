#include "invrender/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "invrender/error.hpp"

namespace invrender {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    fail_invalid("matrix data length " + std::to_string(data_.size()) + " does not match " +
                 std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) fail_invalid("ragged matrix literal");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vector>& columns) {
  if (columns.empty()) return {};
  Matrix m(columns.front().size(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) m.set_column(c, columns[c]);
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) {
    fail_invalid("column length " + std::to_string(values.size()) + " does not match " +
                 std::to_string(rows_) + " rows");
  }
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::leading_columns(std::size_t count) const {
  count = std::min(count, cols_);
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_), count, out.row(r).begin());
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail_invalid("multiply: inner dimensions " + std::to_string(a.cols()) + " and " +
                 std::to_string(b.rows()) + " differ");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail_invalid("multiply_at_b: row counts " + std::to_string(a.rows()) + " and " +
                 std::to_string(b.rows()) + " differ");
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += s * brow[j];
    }
  }
  return out;
}

Matrix multiply_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail_invalid("multiply_a_bt: column counts " + std::to_string(a.cols()) + " and " +
                 std::to_string(b.cols()) + " differ");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  return out;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    fail_invalid("matrix-vector: matrix has " + std::to_string(a.cols()) +
                 " columns but vector has length " + std::to_string(x.size()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    fail_invalid("transposed matrix-vector: matrix has " + std::to_string(a.rows()) +
                 " rows but vector has length " + std::to_string(x.size()));
  }
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double s = x[i];
    auto row = a.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += s * row[j];
  }
  return out;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail_invalid(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                 std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                 std::to_string(b.cols()) + " differ");
  }
}

}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto d = out.data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto d = out.data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
  return out;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v *= s;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  // Four fixed accumulators: vectorizes without reassociating, so results
  // stay identical across builds.
  const std::size_t n = std::min(a.size(), b.size());
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double frobenius_norm(const Matrix& m) { return std::sqrt(dot(m.data(), m.data())); }

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver

SymmetricEigen symmetric_eigen(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 0 || m.cols() != n) fail_invalid("symmetric_eigen: matrix must be square and nonempty");
  if (!all_finite(m.data())) fail_invalid("symmetric_eigen: non-finite input");

  // The eigenvector matrix is stored transposed (one eigenvector per row) so
  // the inner loops of both phases walk contiguous memory. The input is
  // symmetric, so it is its own transpose.
  Matrix vt = m;
  Vector d(n), e(n);

  for (std::size_t j = 0; j < n; ++j) d[j] = vt(j, n - 1);

  // Householder reduction to tridiagonal form.
  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = vt(j, i - 1);
        vt(j, i) = 0.0;
        vt(i, j) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        vt(i, j) = f;
        g = e[j] + vt(j, j) * f;
        for (std::size_t k = j + 1; k < i; ++k) {
          g += vt(j, k) * d[k];
          e[k] += vt(j, k) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k < i; ++k) vt(j, k) -= (f * e[k] + g * d[k]);
        d[j] = vt(j, i - 1);
        vt(j, i) = 0.0;
      }
    }
    d[i] = h;
  }

  // Accumulate transformations.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    vt(i, n - 1) = vt(i, i);
    vt(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = vt(i + 1, k) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += vt(i + 1, k) * vt(j, k);
        for (std::size_t k = 0; k <= i; ++k) vt(j, k) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) vt(i + 1, k) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = vt(j, n - 1);
    vt(j, n - 1) = 0.0;
  }
  vt(n - 1, n - 1) = 1.0;
  e[0] = 0.0;


  // Implicit QL on the tridiagonal matrix.
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  constexpr int kMaxIterations = 60;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m_idx = l;
    while (m_idx < n) {
      if (std::abs(e[m_idx]) <= eps * tst1) break;
      ++m_idx;
    }
    if (m_idx == n) m_idx = n - 1;

    if (m_idx > l) {
      int iter = 0;
      do {
        if (++iter > kMaxIterations) {
          fail_numerical("symmetric_eigen: QL iteration did not converge");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m_idx];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m_idx; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          auto vi = vt.row(ii);
          auto vi1 = vt.row(ii + 1);
          for (std::size_t k = 0; k < n; ++k) {
            const double t = vi1[k];
            vi1[k] = s * vi[k] + c * t;
            vi[k] = c * vi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    auto src = vt.row(order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = src[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVD

namespace {

// Column-major scratch: column j occupies [j*len, (j+1)*len).
struct ColumnBlock {
  std::size_t len = 0;
  std::size_t count = 0;
  std::vector<double> data;

  std::span<double> col(std::size_t j) { return {data.data() + j * len, len}; }
  std::span<const double> col(std::size_t j) const { return {data.data() + j * len, len}; }
};

ColumnBlock to_columns(const Matrix& m) {
  ColumnBlock b{m.rows(), m.cols(), std::vector<double>(m.size())};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) b.data[c * m.rows() + r] = m(r, c);
  }
  return b;
}

// Above this column count the Jacobi sweeps start from the eigenvectors of the
// Gram matrix, which leaves only a couple of cleanup sweeps.
constexpr std::size_t kGramPreconditionCols = 32;
constexpr int kMaxSweeps = 60;

void rotate(std::span<double> x, std::span<double> y, double c, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// One-sided Jacobi on a tall matrix (rows >= cols). On return the columns of
// w are mutually orthogonal and w = a·v.
void one_sided_jacobi(ColumnBlock& w, ColumnBlock& v, double frob) {
  const std::size_t n = w.count;
  const double tol =
      std::max(1e-15, std::sqrt(static_cast<double>(w.len)) * std::numeric_limits<double>::epsilon());
  // Columns this small are discarded by the rank cut regardless of rotations.
  const double negligible = 1e-13 * frob;
  const double negligible_sq = negligible * negligible;

  Vector norms(n);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) norms[j] = dot(w.col(j), w.col(j));
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = norms[p];
        const double beta = norms[q];
        if (alpha <= negligible_sq || beta <= negligible_sq) continue;
        const double gamma = dot(w.col(p), w.col(q));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(w.col(p), w.col(q), c, s);
        rotate(v.col(p), v.col(q), c, s);
        norms[p] = alpha - t * gamma;
        norms[q] = beta + t * gamma;
      }
    }
    if (!rotated) return;
  }
  fail_numerical("svd: Jacobi sweeps did not converge within " + std::to_string(kMaxSweeps) +
                 " sweeps");
}

}  // namespace

SvdResult svd(const Matrix& m) {
  if (m.empty()) fail_invalid("svd: empty matrix");
  if (!all_finite(m.data())) fail_invalid("svd: non-finite input");

  const bool transposed = m.rows() < m.cols();
  const Matrix a = transposed ? transpose(m) : m;
  const std::size_t rows = a.rows();
  const std::size_t n = a.cols();
  const double frob = frobenius_norm(a);

  ColumnBlock w;
  ColumnBlock v{n, n, std::vector<double>(n * n, 0.0)};
  if (n > kGramPreconditionCols) {
    const SymmetricEigen eig = symmetric_eigen(multiply_at_b(a, a));
    w = to_columns(multiply(a, eig.vectors));
    v = to_columns(eig.vectors);
  } else {
    w = to_columns(a);
    for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;
  }

  one_sided_jacobi(w, v, frob);

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(w.col(j), w.col(j)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double sigma_max = sigma[order[0]];
  std::size_t rank = 0;
  if (sigma_max > 0.0) {
    while (rank < n && sigma[order[rank]] > kRankTolerance * sigma_max) ++rank;
  }

  // Left factor of `a` (rows x rank) and right factor (n x rank).
  Matrix left(rows, rank), right(n, rank);
  Vector values(rank);
  for (std::size_t j = 0; j < rank; ++j) {
    const std::size_t src = order[j];
    values[j] = sigma[src];
    const auto wc = w.col(src);
    const auto vc = v.col(src);
    for (std::size_t i = 0; i < rows; ++i) left(i, j) = wc[i] / values[j];
    for (std::size_t i = 0; i < n; ++i) right(i, j) = vc[i];
  }

  SvdResult out;
  out.rank = rank;
  out.sigma = std::move(values);
  out.u = transposed ? std::move(right) : std::move(left);
  out.v = transposed ? std::move(left) : std::move(right);

  for (std::size_t j = 0; j < rank; ++j) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < out.u.rows(); ++i) {
      const double x = std::abs(out.u(i, j));
      if (x > best_abs) {
        best_abs = x;
        best = i;
      }
    }
    if (out.u(best, j) < 0.0) {
      for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
      for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
    }
  }
  return out;
}

Matrix pseudo_inverse(const Matrix& m) {
  const SvdResult s = svd(m);
  // A⁺ = V·diag(1/σ)·Uᵀ
  Matrix scaled_v = s.v;
  for (std::size_t i = 0; i < scaled_v.rows(); ++i) {
    for (std::size_t j = 0; j < s.rank; ++j) scaled_v(i, j) /= s.sigma[j];
  }
  return multiply(scaled_v, transpose(s.u));
}

LeastSquaresFactors least_squares_factors(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail_invalid("least_squares: sample counts differ (" + std::to_string(a.cols()) + " vs " +
                 std::to_string(b.cols()) + ")");
  }
  if (!all_finite(b.data())) fail_invalid("least_squares: non-finite target");
  if (a.rows() == 0 || a.cols() == 0) return {Matrix(b.rows(), 0), Matrix(0, a.rows())};
  const SvdResult s = svd(a);
  // X = b·a⁺ = (b·V)·diag(1/σ)·Uᵀ
  LeastSquaresFactors f{multiply(b, s.v), transpose(s.u)};
  for (std::size_t i = 0; i < f.left.rows(); ++i) {
    for (std::size_t j = 0; j < s.rank; ++j) f.left(i, j) /= s.sigma[j];
  }
  return f;
}

Matrix least_squares(const Matrix& a, const Matrix& b) {
  const LeastSquaresFactors f = least_squares_factors(a, b);
  if (f.right.rows() == 0) return Matrix(b.rows(), a.rows());
  return multiply(f.left, f.right);
}

}  // namespace invrender
