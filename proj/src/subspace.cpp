#include "invrender/subspace.hpp"

#include <cmath>
#include <random>

#include "invrender/error.hpp"
#include "invrender/io.hpp"
#include "invrender/shapes.hpp"

namespace invrender {

namespace {

constexpr int kSsmVersion = 1;

Vector row_means(const Matrix& samples) {
  Vector mean(samples.rows(), 0.0);
  const double n = static_cast<double>(samples.cols());
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    double s = 0.0;
    for (double v : samples.row(r)) s += v;
    mean[r] = s / n;
  }
  return mean;
}

Matrix subtract_from_columns(const Matrix& samples, std::span<const double> mean) {
  Matrix out = samples;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v -= mean[r];
  return out;
}

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail_invalid(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                 std::to_string(got));
  }
}

}  // namespace

SubspaceModel fit_subspace(const Matrix& samples, std::size_t k) {
  const std::size_t dim = samples.rows();
  const std::size_t n = samples.cols();
  if (n < 2) fail_invalid("fit_subspace: need at least 2 samples, got " + std::to_string(n));
  if (k == 0 || k > std::min(dim, n)) {
    fail_invalid("fit_subspace: k = " + std::to_string(k) + " must lie in [1, min(dim " + std::to_string(dim) +
                 ", samples " + std::to_string(n) + ")]");
  }
  SubspaceModel model;
  model.requested_k = k;
  model.mean = row_means(samples);
  const Matrix centered = subtract_from_columns(samples, model.mean);

  if (max_abs(centered) == 0.0) {
    model.basis = Matrix(dim, 0);
    return model;
  }
  const SvdResult s = svd(centered);
  const std::size_t kept = std::min(k, s.rank);
  model.basis = s.u.leading_columns(kept);
  model.singular_values.assign(s.sigma.begin(), s.sigma.begin() + static_cast<std::ptrdiff_t>(kept));
  return model;
}

Vector encode(const SubspaceModel& model, std::span<const double> x) {
  require_length(x.size(), model.dim(), "encode");
  Vector centered(x.begin(), x.end());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] -= model.mean[i];
  return multiply_transposed(model.basis, centered);
}

Vector decode(const SubspaceModel& model, std::span<const double> code) {
  require_length(code.size(), model.k(), "decode");
  Vector out = multiply(model.basis, code);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += model.mean[i];
  return out;
}

Matrix encode_all(const SubspaceModel& model, const Matrix& samples) {
  require_length(samples.rows(), model.dim(), "encode_all");
  return multiply_at_b(model.basis, subtract_from_columns(samples, model.mean));
}

Matrix decode_all(const SubspaceModel& model, const Matrix& codes) {
  require_length(codes.rows(), model.k(), "decode_all");
  Matrix out = multiply(model.basis, codes);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v += model.mean[r];
  return out;
}

std::string encode_ssm(const SubspaceModel& model) {
  nlohmann::json header = {{"format", "ssm"},
                           {"format_version", kSsmVersion},
                           {"dim", model.dim()},
                           {"k", model.k()},
                           {"requested_k", model.requested_k}};
  Vector payload = model.mean;
  for (std::size_t c = 0; c < model.k(); ++c)
    for (std::size_t r = 0; r < model.dim(); ++r) payload.push_back(model.basis(r, c));
  payload.insert(payload.end(), model.singular_values.begin(), model.singular_values.end());
  return io::encode_blob(header, payload);
}

SubspaceModel decode_ssm(std::string_view bytes) {
  io::Blob blob = io::decode_blob(bytes);
  if (blob.header.value("format", "") != "ssm") fail_format("not a subspace model (.ssm) file");
  if (blob.header.value("format_version", 0) != kSsmVersion) fail_format("unsupported .ssm format_version");
  const auto dim = blob.header.at("dim").get<std::size_t>();
  const auto k = blob.header.at("k").get<std::size_t>();
  const std::size_t want = dim + dim * k + k;
  if (blob.values.size() < want) fail_format("unexpected end of file");
  if (blob.values.size() > want) fail_format(".ssm payload longer than its header declares");
  SubspaceModel model;
  model.requested_k = blob.header.value("requested_k", k);
  const auto& v = blob.values;
  model.mean.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(dim));
  model.basis = Matrix(dim, k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < dim; ++r) model.basis(r, c) = v[dim + c * dim + r];
  model.singular_values.assign(v.begin() + static_cast<std::ptrdiff_t>(dim + dim * k), v.end());
  return model;
}

void save_subspace(const std::filesystem::path& path, const SubspaceModel& model) {
  io::write_file_atomic(path, encode_ssm(model));
}

SubspaceModel load_subspace(const std::filesystem::path& path) { return decode_ssm(io::read_file(path)); }

LinearAutoencoder train_linear_autoencoder(const Matrix& samples, std::size_t k,
                                           const AutoencoderSchedule& schedule) {
  const std::size_t dim = samples.rows();
  const std::size_t n = samples.cols();
  if (n < 2) fail_invalid("train_linear_autoencoder: need at least 2 samples");
  if (k == 0 || k > std::min(dim, n)) fail_invalid("train_linear_autoencoder: k outside [1, min(dim, n)]");
  if (!(schedule.learning_rate > 0.0)) fail_invalid("train_linear_autoencoder: learning rate must be positive");

  LinearAutoencoder ae;
  ae.encoder = Matrix(k, dim);
  ae.decoder = Matrix(dim, k);
  ae.encoder_bias.assign(k, 0.0);
  ae.decoder_bias.assign(dim, 0.0);
  if (!schedule.zero_init) {
    std::mt19937_64 rng(schedule.seed);
    const double limit = schedule.init_scale * std::sqrt(6.0 / static_cast<double>(dim + k));
    for (double& w : ae.encoder.data()) w = limit * (2.0 * unit_double(rng()) - 1.0);
    for (double& w : ae.decoder.data()) w = limit * (2.0 * unit_double(rng()) - 1.0);
  }

  const double scale = 2.0 / static_cast<double>(n);
  const double lr = schedule.learning_rate;
  auto residual_and_hidden = [&](Matrix& hidden) {
    hidden = multiply(ae.encoder, samples);
    for (std::size_t r = 0; r < k; ++r)
      for (double& v : hidden.row(r)) v += ae.encoder_bias[r];
    Matrix residual = multiply(ae.decoder, hidden) - samples;
    for (std::size_t r = 0; r < dim; ++r)
      for (double& v : residual.row(r)) v += ae.decoder_bias[r];
    return residual;
  };

  Matrix hidden;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const Matrix residual = residual_and_hidden(hidden);
    const double loss = dot(residual.data(), residual.data()) / static_cast<double>(n);
    if (!std::isfinite(loss)) fail_numerical("linear autoencoder diverged at epoch " + std::to_string(epoch));

    // L = (1/n)‖W_d(W_e X + b_e) + b_d − X‖²
    const Matrix grad_decoder = scale * transpose(multiply(hidden, transpose(residual)));
    const Matrix grad_hidden = scale * multiply_at_b(ae.decoder, residual);
    const Matrix grad_encoder = multiply(grad_hidden, transpose(samples));
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (double v : residual.row(r)) s += v;
      ae.decoder_bias[r] -= lr * scale * s;
    }
    for (std::size_t r = 0; r < k; ++r) {
      double s = 0.0;
      for (double v : grad_hidden.row(r)) s += v;
      ae.encoder_bias[r] -= lr * s;
    }
    ae.decoder = ae.decoder - lr * grad_decoder;
    ae.encoder = ae.encoder - lr * grad_encoder;
  }
  const Matrix residual = residual_and_hidden(hidden);
  ae.final_loss = dot(residual.data(), residual.data()) / static_cast<double>(n);
  if (!std::isfinite(ae.final_loss)) fail_numerical("linear autoencoder diverged at the final epoch");
  return ae;
}

}  // namespace invrender
