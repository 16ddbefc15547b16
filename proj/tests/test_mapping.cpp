#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "invrender/error.hpp"
#include "invrender/mapping.hpp"
#include "test_support.hpp"

using namespace invrender;
using invrender::testing::random_matrix;
using invrender::testing::random_vector;
using invrender::testing::relative_frobenius;
using invrender::testing::uniform;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
  return m;
}

Matrix centered(const Matrix& x, Vector* mean = nullptr) {
  Matrix out = x;
  Vector mu(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double v : x.row(r)) mu[r] += v;
    mu[r] /= static_cast<double>(x.cols());
    for (double& v : out.row(r)) v -= mu[r];
  }
  if (mean) *mean = mu;
  return out;
}

// Straightforward per-sample forward pass kept apart from the library code.
Vector naive_forward(const MlpMap& m, Vector a) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const MlpLayer& layer = m.layers[l];
    Vector z(layer.weights.rows());
    for (std::size_t i = 0; i < z.size(); ++i) {
      double s = layer.bias[i];
      for (std::size_t j = 0; j < a.size(); ++j) s += layer.weights(i, j) * a[j];
      z[i] = (l + 1 < m.layers.size() && m.activation == Activation::Tanh) ? std::tanh(s) : s;
    }
    a = std::move(z);
  }
  return a;
}

double rmse(const Matrix& pred, const Matrix& truth) {
  double total = 0.0;
  for (std::size_t s = 0; s < pred.cols(); ++s) {
    double e = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) e += (pred(r, s) - truth(r, s)) * (pred(r, s) - truth(r, s));
    total += std::sqrt(e / static_cast<double>(pred.rows()));
  }
  return total / static_cast<double>(pred.cols());
}

}  // namespace

TEST_CASE("linear map examples") {
  std::mt19937_64 rng(1);
  const Matrix y = random_matrix(rng, 4, 12);
  CHECK(max_abs(fit_linear_map(y, y).t - Matrix::identity(4)) <= 1e-12);
  CHECK(max_abs(fit_linear_map(y, 3.0 * y).t - 3.0 * Matrix::identity(4)) <= 1e-12);
  CHECK_THROWS_AS(fit_linear_map(y, random_matrix(rng, 4, 11)), Error);
}

TEST_CASE("linear map matches the normal equations") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    const std::size_t kp = 1 + rng() % 8;
    const std::size_t n = k + 1 + rng() % 20;
    const Matrix y = random_matrix(rng, k, n);
    const Matrix b = random_matrix(rng, kp, n);
    const Eigen::MatrixXd ye = to_eigen(y);
    const Eigen::MatrixXd oracle = to_eigen(b) * ye.transpose() * (ye * ye.transpose()).inverse();
    const Matrix t = fit_linear_map(y, b).t;
    CHECK(relative_frobenius(t, from_eigen(oracle)) <= 1e-8);
    const double got = frobenius_norm(b - multiply(t, y));
    const double want = frobenius_norm(b - multiply(from_eigen(oracle), y));
    CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, want));
  }
}

TEST_CASE("pipeline maps the image mean to the shape mean") {
  std::mt19937_64 rng(3);
  const SubspaceModel img = fit_subspace(random_matrix(rng, 9, 7), 3);
  const SubspaceModel shp = fit_subspace(random_matrix(rng, 5, 7), 2);
  const LinearMap t{random_matrix(rng, 2, 3)};
  const Vector out = apply_linear_pipeline(img, shp, t, img.mean);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(out[i] - shp.mean[i]) <= 1e-15);
  CHECK_THROWS_AS(apply_linear_pipeline(img, shp, LinearMap{random_matrix(rng, 3, 3)}, img.mean), Error);
  CHECK_THROWS_AS(apply_linear_pipeline(img, shp, t, Vector(8)), Error);
}

TEST_CASE("three-sample hand case") {
  // Images live in the e1/e2 plane; shapes are z = M·x + c on that plane.
  const Matrix x = Matrix::from_rows({{1, 0, -1}, {0, 1, -1}, {0, 0, 0}, {0, 0, 0}});
  const Matrix m = Matrix::from_rows({{2, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 0, 0}, {0, -3, 0, 0}});
  const Vector c = {0, 0, 1, 0.5};
  Matrix z = multiply(m, x);
  for (std::size_t r = 0; r < 4; ++r)
    for (double& v : z.row(r)) v += c[r];

  const SubspaceModel img = fit_subspace(x, 2);
  const SubspaceModel shp = fit_subspace(z, 2);
  const LinearMap t = fit_linear_map(encode_all(img, x), encode_all(shp, z));
  for (std::size_t s = 0; s < 3; ++s) {
    const Vector out = apply_linear_pipeline(img, shp, t, x.column(s));
    for (std::size_t r = 0; r < 4; ++r) CHECK(std::abs(out[r] - z(r, s)) <= 1e-12);
  }
  // Off-plane coordinates are projected away: (0.5, 0.25, 7, 7) -> M·(0.5, 0.25, 0, 0) + c.
  const Vector out = apply_linear_pipeline(img, shp, t, Vector{0.5, 0.25, 7, 7});
  const Vector want = {1.0, 0.75, 1.0, -0.25};
  for (std::size_t r = 0; r < 4; ++r) CHECK(std::abs(out[r] - want[r]) <= 1e-12);
}

TEST_CASE("full-rank pipeline equals direct least squares on centered data") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8 + rng() % 6;
    const Matrix x = random_matrix(rng, 20, n);
    const Matrix z = random_matrix(rng, 15, n);
    Vector mx, mz;
    const Matrix xc = centered(x, &mx);
    const Matrix zc = centered(z, &mz);
    const SubspaceModel img = fit_subspace(x, n - 1);
    const SubspaceModel shp = fit_subspace(z, n - 1);
    REQUIRE(img.k() == n - 1);
    const LinearMap t = fit_linear_map(encode_all(img, x), encode_all(shp, z));
    const DirectMap direct = fit_direct_map(xc, zc);

    Matrix ours(15, n), oracle = predict_all(direct, xc);
    for (std::size_t s = 0; s < n; ++s) ours.set_column(s, apply_linear_pipeline(img, shp, t, x.column(s)));
    for (std::size_t r = 0; r < 15; ++r)
      for (double& v : oracle.row(r)) v += mz[r];
    CHECK(frobenius_norm(ours - oracle) <= 1e-6 * frobenius_norm(oracle));
  }
}

TEST_CASE("direct map examples") {
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(rng, 6, 15);
  CHECK(max_abs(fit_direct_map(x, x).b_hat() - Matrix::identity(6)) <= 1e-12);

  Matrix p(6, 6);
  const std::size_t perm[6] = {3, 0, 5, 1, 4, 2};
  for (std::size_t i = 0; i < 6; ++i) p(i, perm[i]) = 1.0;
  CHECK(max_abs(fit_direct_map(x, multiply(p, x)).b_hat() - p) <= 1e-12);

  // Fewer samples than pixels: the fit interpolates.
  const Matrix wide = random_matrix(rng, 40, 10);
  const Matrix target = random_matrix(rng, 7, 10);
  const DirectMap d = fit_direct_map(wide, target);
  CHECK(max_abs(predict_all(d, wide) - target) <= 1e-10);
  const Vector one = predict(d, wide.column(3));
  for (std::size_t r = 0; r < 7; ++r) CHECK(std::abs(one[r] - target(r, 3)) <= 1e-10);
}

TEST_CASE("mlp forward examples") {
  MlpMap zero = make_mlp({5, 7, 3}, Activation::Tanh, 1);
  for (auto& layer : zero.layers) {
    for (double& w : layer.weights.data()) w = 0.0;
    for (double& b : layer.bias) b = 0.0;
  }
  CHECK(mlp_forward(zero, Vector{1, 2, 3, 4, 5}) == Vector(3, 0.0));

  std::mt19937_64 rng(6);
  const Matrix w = random_matrix(rng, 4, 6);
  const Vector code = random_vector(rng, 6);
  const Vector a = mlp_forward(single_layer(w), code);
  const Vector b = apply_map(LinearMap{w}, code);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-15);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MlpMap net = make_mlp({6, 9, 5, 4}, Activation::Tanh, seed);
    for (auto& layer : net.layers)
      for (double& v : layer.bias) v = uniform(rng, -0.5, 0.5);
    const Vector in = random_vector(rng, 6);
    const Vector got = mlp_forward(net, in);
    const Vector want = naive_forward(net, in);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-14);
    const Matrix batch = random_matrix(rng, 6, 3);
    const Matrix all = mlp_forward_all(net, batch);
    for (std::size_t s = 0; s < 3; ++s) {
      const Vector col = naive_forward(net, batch.column(s));
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(all(i, s) - col[i]) <= 1e-14);
    }
  }
  CHECK_THROWS_AS(mlp_forward(make_mlp({3, 2}, Activation::Tanh, 0), Vector(4)), Error);
}

TEST_CASE("gradients vanish at perfect predictions") {
  std::mt19937_64 rng(7);
  const MlpMap net = make_mlp({4, 6, 3}, Activation::Tanh, 2);
  const Matrix in = random_matrix(rng, 4, 5);
  const MlpGradients g = mlp_gradients(net, in, mlp_forward_all(net, in));
  CHECK(g.loss == 0.0);
  for (const Matrix& w : g.weights) CHECK(max_abs(w) == 0.0);
  for (const Vector& b : g.biases)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("single-layer gradient matches the least-squares formula") {
  std::mt19937_64 rng(8);
  const Matrix w = random_matrix(rng, 3, 5);
  MlpMap net = single_layer(w);
  net.layers[0].bias = random_vector(rng, 3);
  const Matrix x = random_matrix(rng, 5, 7);
  const Matrix t = random_matrix(rng, 3, 7);
  const MlpGradients g = mlp_gradients(net, x, t);

  Matrix r = multiply(w, x) - t;
  for (std::size_t i = 0; i < 3; ++i)
    for (double& v : r.row(i)) v += net.layers[0].bias[i];
  const Matrix want = (2.0 / 7.0) * multiply(r, transpose(x));
  CHECK(max_abs(g.weights[0] - want) <= 1e-14);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (double v : r.row(i)) s += v;
    CHECK(std::abs(g.biases[0][i] - 2.0 / 7.0 * s) <= 1e-14);
  }
}

TEST_CASE("analytic gradients agree with central differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    MlpMap net = make_mlp({10, 8, 12}, Activation::Tanh, seed);
    for (auto& layer : net.layers)
      for (double& v : layer.bias) v = uniform(rng, -0.3, 0.3);
    const Matrix x = random_matrix(rng, 10, 6);
    const Matrix t = random_matrix(rng, 12, 6);
    const MlpGradients g = mlp_gradients(net, x, t);

    auto check_entry = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = mlp_loss(net, x, t);
      param = keep - h;
      const double down = mlp_loss(net, x, t);
      param = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      CHECK(std::abs(analytic - numeric) <= 1e-4 * scale);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto w = net.layers[l].weights.data();
      for (std::size_t i = 0; i < w.size(); ++i) check_entry(w[i], g.weights[l].data()[i]);
      for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i) check_entry(net.layers[l].bias[i], g.biases[l][i]);
    }
  }
}

TEST_CASE("full-batch descent on a convex instance never increases the loss") {
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(rng, 5, 30);
  const Matrix t = random_matrix(rng, 4, 30);
  const TrainSchedule s{{{1e-4, 300}}, 30, 1};
  const TrainResult r = mlp_train({5, 4}, x, t, s);
  REQUIRE(r.loss_history.size() == 300);
  for (std::size_t e = 1; e < r.loss_history.size(); ++e) CHECK(r.loss_history[e] <= r.loss_history[e - 1]);
  CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("training contracts") {
  std::mt19937_64 rng(10);
  const Matrix x = random_matrix(rng, 4, 50);
  const Matrix t = random_matrix(rng, 3, 50);
  const TrainResult none = mlp_train({4, 6, 3}, x, t, TrainSchedule{{}, 40, 5});
  const MlpMap init = make_mlp({4, 6, 3}, Activation::Tanh, 5);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(none.model.layers[l].weights == init.layers[l].weights);
    CHECK(none.model.layers[l].bias == init.layers[l].bias);
  }
  CHECK(none.loss_history.empty());

  const TrainSchedule s{{{0.01, 20}, {0.001, 10}}, 8, 77};
  const TrainResult a = mlp_train({4, 6, 3}, x, t, s);
  const TrainResult b = mlp_train({4, 6, 3}, x, t, s);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.model.layers[0].weights == b.model.layers[0].weights);
  CHECK(a.model.layers[1].bias == b.model.layers[1].bias);
  const TrainResult c = mlp_train({4, 6, 3}, x, t, TrainSchedule{s.phases, 8, 78});
  CHECK(c.model.layers[0].weights != a.model.layers[0].weights);

  CHECK_THROWS_AS(mlp_train({4, 6, 3}, x, t, TrainSchedule{{{0.0, 5}}, 8, 1}), Error);
  CHECK_THROWS_AS(mlp_train({4, 6, 3}, x, t, TrainSchedule{{{0.1, 0}}, 8, 1}), Error);
  CHECK_THROWS_AS(mlp_train({5, 6, 3}, x, t, s), Error);
  try {
    mlp_train({4, 6, 3}, 1e6 * x, t, TrainSchedule{{{1e3, 50}}, 8, 1});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericalFailure);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("mlp trained on a linear relation approaches the closed form") {
  std::mt19937_64 rng(11);
  const std::size_t k = 6, kp = 8, n_train = 200, n_test = 50;
  const Matrix t_true = 0.5 * random_matrix(rng, kp, k);
  auto make = [&](std::size_t n, Matrix& y, Matrix& b) {
    y = random_matrix(rng, k, n);
    b = multiply(t_true, y);
    for (double& v : b.data()) v += 0.05 * uniform(rng, -1.0, 1.0);
  };
  Matrix y_train, b_train, y_test, b_test;
  make(n_train, y_train, b_train);
  make(n_test, y_test, b_test);

  const LinearMap closed = fit_linear_map(y_train, b_train);
  const TrainResult mlp = mlp_train({k, 100, kp}, y_train, b_train, TrainSchedule::reference(42));
  const double closed_test = rmse(multiply(closed.t, y_test), b_test);
  const double mlp_test = rmse(mlp_forward_all(mlp.model, y_test), b_test);
  MESSAGE("closed-form test RMSE " << closed_test << ", MLP " << mlp_test);
  CHECK(mlp_test <= 1.1 * closed_test);

  const double closed_train = mlp_loss(single_layer(closed.t), y_train, b_train);
  CHECK(mlp_loss(mlp.model, y_train, b_train) <= 1.1 * closed_train);
}

TEST_CASE("map files round-trip") {
  const MlpMap net = make_mlp({3, 5, 2}, Activation::Tanh, 9);
  const StoredMap back = decode_map(encode_map({MapKind::Mlp, net}));
  CHECK(back.kind == MapKind::Mlp);
  CHECK(back.net.layer_sizes == net.layer_sizes);
  CHECK(back.net.layers[1].weights == net.layers[1].weights);
  const std::string bytes = encode_map({MapKind::LowDim, single_layer(Matrix::identity(3))});
  const StoredMap lin = decode_map(bytes);
  CHECK(lin.kind == MapKind::LowDim);
  CHECK(lin.net.activation == Activation::Identity);
  CHECK_THROWS_AS(decode_map(bytes.substr(0, bytes.size() - 1)), Error);
  CHECK(parse_map_kind("direct") == MapKind::Direct);
  CHECK_THROWS_AS(parse_map_kind("cnn"), Error);
}
