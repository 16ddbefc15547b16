#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "invrender/linalg.hpp"
#include "invrender/subspace.hpp"

namespace invrender {

// Code-to-code map between the two representation spaces.
struct LinearMap {
  Matrix t;  // k' x k
};

// Raw image-to-shape map B̂ = left·right (p x D), kept factored through the
// rank of the training images.
struct DirectMap {
  Matrix left;   // p x r
  Matrix right;  // r x D

  std::size_t input_size() const { return right.cols(); }
  std::size_t output_size() const { return left.rows(); }
  Matrix b_hat() const;
};

// Minimum-norm T minimizing ‖b − T·y‖. y: k x n, b: k' x n.
LinearMap fit_linear_map(const Matrix& y, const Matrix& b);
Vector apply_map(const LinearMap& map, std::span<const double> code);

// shape_model.decode(t · image_model.encode(x))
Vector apply_linear_pipeline(const SubspaceModel& image_model, const SubspaceModel& shape_model,
                             const LinearMap& map, std::span<const double> x);

// x: D x n, z: p x n, both uncentered.
DirectMap fit_direct_map(const Matrix& x, const Matrix& z);
Vector predict(const DirectMap& map, std::span<const double> x);
Matrix predict_all(const DirectMap& map, const Matrix& x);

enum class Activation { Tanh, Identity };
std::string to_string(Activation a);
Activation parse_activation(std::string_view name);

struct MlpLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

// Hidden layers apply the activation; the output layer is affine.
struct MlpMap {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::Tanh;
  std::vector<MlpLayer> layers;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
};

// Weights uniform in ±√(6/(fan_in+fan_out)), biases zero.
MlpMap make_mlp(const std::vector<std::size_t>& layer_sizes, Activation activation, std::uint64_t seed);
// One affine layer with zero bias.
MlpMap single_layer(const Matrix& weights);

Vector mlp_forward(const MlpMap& m, std::span<const double> code);
// codes: in x n -> out x n
Matrix mlp_forward_all(const MlpMap& m, const Matrix& codes);

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double loss = 0.0;  // (1/B) Σ ‖prediction − target‖²
};

// batch_in: in x B, batch_target: out x B.
MlpGradients mlp_gradients(const MlpMap& m, const Matrix& batch_in, const Matrix& batch_target);
double mlp_loss(const MlpMap& m, const Matrix& inputs, const Matrix& targets);

struct LearningPhase {
  double learning_rate = 0.0;
  std::size_t epochs = 0;
};

struct TrainSchedule {
  std::vector<LearningPhase> phases;
  std::size_t batch_size = 40;
  std::uint64_t seed = 0;

  // 0.001 for 1000 epochs, then 0.00001 for 1000 more, batches of 40.
  static TrainSchedule reference(std::uint64_t seed);
  std::size_t total_epochs() const;
};

struct TrainResult {
  MlpMap model;
  std::vector<double> loss_history;  // mean per-sample loss of each epoch
};

// Mini-batch SGD over (inputs, targets) columns. An empty phase list returns
// the initialization.
TrainResult mlp_train(const std::vector<std::size_t>& layer_sizes, const Matrix& inputs, const Matrix& targets,
                      const TrainSchedule& schedule, Activation activation = Activation::Tanh);

// Same, starting from the given network.
TrainResult mlp_train_from(MlpMap init, const Matrix& inputs, const Matrix& targets, const TrainSchedule& schedule);

// .map files: JSON header {format, format_version, kind, layer_sizes,
// activation}, then each layer's weights (row-major) and bias.
enum class MapKind { LowDim, Direct, Mlp };
std::string to_string(MapKind kind);
MapKind parse_map_kind(std::string_view name);

struct StoredMap {
  MapKind kind = MapKind::Mlp;
  MlpMap net;
};

std::string encode_map(const StoredMap& map);
StoredMap decode_map(std::string_view bytes);
void save_map(const std::filesystem::path& path, const StoredMap& map);
StoredMap load_map(const std::filesystem::path& path);

}  // namespace invrender
