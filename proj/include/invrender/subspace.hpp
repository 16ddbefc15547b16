#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "invrender/linalg.hpp"

namespace invrender {

// Affine PCA model: mean + span(basis). Encodes and decodes one modality
// (images or shapes).
struct SubspaceModel {
  Vector mean;
  Matrix basis;            // dim x k, orthonormal columns
  Vector singular_values;  // k, descending, of the centered training matrix
  std::size_t requested_k = 0;

  std::size_t dim() const noexcept { return mean.size(); }
  std::size_t k() const noexcept { return basis.cols(); }
  // True when the training data had fewer than requested_k nonzero directions.
  bool rank_reduced() const noexcept { return k() < requested_k; }
};

// samples: dim x n, one sample per column. n >= 2 and 1 <= k <= min(dim, n).
SubspaceModel fit_subspace(const Matrix& samples, std::size_t k);

// basisᵀ·(x − mean)
Vector encode(const SubspaceModel& model, std::span<const double> x);
// mean + basis·code
Vector decode(const SubspaceModel& model, std::span<const double> code);

// Column-wise versions over a dim x n (resp. k x n) matrix.
Matrix encode_all(const SubspaceModel& model, const Matrix& samples);
Matrix decode_all(const SubspaceModel& model, const Matrix& codes);

// .ssm: JSON header {format, format_version, dim, k, requested_k}, then mean,
// basis column-major and singular values as little-endian doubles.
std::string encode_ssm(const SubspaceModel& model);
SubspaceModel decode_ssm(std::string_view bytes);
void save_subspace(const std::filesystem::path& path, const SubspaceModel& model);
SubspaceModel load_subspace(const std::filesystem::path& path);

// Full-batch gradient descent on the mean squared reconstruction error.
struct AutoencoderSchedule {
  double learning_rate = 0.05;
  std::size_t epochs = 20000;
  std::uint64_t seed = 0;
  bool zero_init = false;
  // Multiplies the Xavier bound. Weight components orthogonal to the data
  // span receive no gradient, so a small scale keeps them negligible.
  double init_scale = 1e-3;
};

struct LinearAutoencoder {
  Matrix encoder;       // k x dim
  Vector encoder_bias;  // k
  Matrix decoder;       // dim x k
  Vector decoder_bias;  // dim
  double final_loss = 0.0;

  // decoder·encoder, the linear part of the reconstruction map.
  Matrix projector() const { return multiply(decoder, encoder); }
};

LinearAutoencoder train_linear_autoencoder(const Matrix& samples, std::size_t k,
                                           const AutoencoderSchedule& schedule);

}  // namespace invrender
