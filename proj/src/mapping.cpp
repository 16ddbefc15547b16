#include "invrender/mapping.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "invrender/error.hpp"
#include "invrender/io.hpp"
#include "invrender/shapes.hpp"

namespace invrender {

namespace {

constexpr int kMapVersion = 1;

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_count(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols()) {
    fail_invalid(std::string(what) + ": sample counts differ (" + std::to_string(a.cols()) + " vs " +
                 std::to_string(b.cols()) + ")");
  }
  if (a.cols() == 0) fail_invalid(std::string(what) + ": no samples");
}

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return static_cast<std::size_t>(r % b);
}

void validate_net(const MlpMap& m) {
  if (m.layer_sizes.size() < 2) fail_invalid("MLP needs at least an input and an output layer");
  if (m.layers.size() != m.layer_sizes.size() - 1) fail_invalid("MLP layer count does not match layer_sizes");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const MlpLayer& layer = m.layers[l];
    if (layer.weights.rows() != m.layer_sizes[l + 1] || layer.weights.cols() != m.layer_sizes[l] ||
        layer.bias.size() != m.layer_sizes[l + 1]) {
      fail_invalid("MLP layer " + std::to_string(l) + " has weights " + dims(layer.weights) + ", expected " +
                   std::to_string(m.layer_sizes[l + 1]) + "x" + std::to_string(m.layer_sizes[l]));
    }
  }
}

// Activations per layer with samples as rows: acts[0] = input (B x in),
// acts[l + 1] = output of layer l.
std::vector<Matrix> forward_rows(const MlpMap& m, Matrix input_rows) {
  std::vector<Matrix> acts;
  acts.reserve(m.layers.size() + 1);
  acts.push_back(std::move(input_rows));
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Matrix z = multiply_a_bt(acts.back(), m.layers[l].weights);
    const bool hidden = l + 1 < m.layers.size();
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += m.layers[l].bias[j];
        if (hidden && m.activation == Activation::Tanh) row[j] = std::tanh(row[j]);
      }
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

double squared_error_rows(const Matrix& pred, const Matrix& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  return s;
}

MlpGradients backward_rows(const MlpMap& m, const std::vector<Matrix>& acts, const Matrix& target_rows) {
  const std::size_t batch = target_rows.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  MlpGradients g;
  g.weights.resize(m.layers.size());
  g.biases.resize(m.layers.size());
  g.loss = squared_error_rows(acts.back(), target_rows) * inv_batch;

  Matrix delta = acts.back() - target_rows;
  for (double& v : delta.data()) v *= 2.0 * inv_batch;
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    g.weights[l] = multiply_at_b(delta, acts[l]);
    g.biases[l].assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) g.biases[l][j] += row[j];
    }
    if (l == 0) break;
    Matrix up = multiply(delta, m.layers[l].weights);
    if (m.activation == Activation::Tanh) {
      const auto a = acts[l].data();
      auto u = up.data();
      for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 1.0 - a[i] * a[i];
    }
    delta = std::move(up);
  }
  return g;
}

Matrix gather_rows(const Matrix& rows, std::span<const std::size_t> index) {
  Matrix out(index.size(), rows.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto src = rows.row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void validate_schedule(const TrainSchedule& s) {
  if (s.batch_size == 0) fail_invalid("batch size must be positive");
  for (const LearningPhase& p : s.phases) {
    if (!(p.learning_rate > 0.0) || !std::isfinite(p.learning_rate))
      fail_invalid("learning rates must be positive and finite");
    if (p.epochs == 0) fail_invalid("each learning-rate phase needs at least one epoch");
  }
}

}  // namespace

LinearMap fit_linear_map(const Matrix& y, const Matrix& b) {
  require_same_count(y, b, "fit_linear_map");
  return {least_squares(y, b)};
}

Vector apply_map(const LinearMap& map, std::span<const double> code) { return multiply(map.t, code); }

Vector apply_linear_pipeline(const SubspaceModel& image_model, const SubspaceModel& shape_model,
                             const LinearMap& map, std::span<const double> x) {
  if (map.t.cols() != image_model.k() || map.t.rows() != shape_model.k()) {
    fail_invalid("mapping is " + dims(map.t) + " but the image subspace has k = " + std::to_string(image_model.k()) +
                 " and the shape subspace has k = " + std::to_string(shape_model.k()));
  }
  return decode(shape_model, apply_map(map, encode(image_model, x)));
}

DirectMap fit_direct_map(const Matrix& x, const Matrix& z) {
  require_same_count(x, z, "fit_direct_map");
  LeastSquaresFactors f = least_squares_factors(x, z);
  return {std::move(f.left), std::move(f.right)};
}

Matrix DirectMap::b_hat() const { return multiply(left, right); }

Vector predict(const DirectMap& map, std::span<const double> x) { return multiply(map.left, multiply(map.right, x)); }

Matrix predict_all(const DirectMap& map, const Matrix& x) { return multiply(map.left, multiply(map.right, x)); }

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  fail_invalid("unknown activation '" + std::string(name) + "'");
}

MlpMap make_mlp(const std::vector<std::size_t>& layer_sizes, Activation activation, std::uint64_t seed) {
  if (layer_sizes.size() < 2) fail_invalid("MLP needs at least an input and an output layer");
  for (std::size_t s : layer_sizes)
    if (s == 0) fail_invalid("MLP layer sizes must be positive");
  MlpMap m;
  m.layer_sizes = layer_sizes;
  m.activation = activation;
  std::mt19937_64 rng(derive_seed(seed, 0));
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    MlpLayer layer{Matrix(out, in), Vector(out, 0.0)};
    for (double& w : layer.weights.data()) w = limit * (2.0 * unit_double(rng()) - 1.0);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

MlpMap single_layer(const Matrix& weights) {
  MlpMap m;
  m.layer_sizes = {weights.cols(), weights.rows()};
  m.activation = Activation::Identity;
  m.layers.push_back({weights, Vector(weights.rows(), 0.0)});
  return m;
}

Vector mlp_forward(const MlpMap& m, std::span<const double> code) {
  validate_net(m);
  if (code.size() != m.input_size()) {
    fail_invalid("MLP input has length " + std::to_string(code.size()) + ", expected " +
                 std::to_string(m.input_size()));
  }
  Matrix in(1, code.size(), Vector(code.begin(), code.end()));
  const Matrix out = forward_rows(m, std::move(in)).back();
  return Vector(out.data().begin(), out.data().end());
}

Matrix mlp_forward_all(const MlpMap& m, const Matrix& codes) {
  validate_net(m);
  if (codes.rows() != m.input_size()) {
    fail_invalid("MLP inputs have " + std::to_string(codes.rows()) + " rows, expected " +
                 std::to_string(m.input_size()));
  }
  return transpose(forward_rows(m, transpose(codes)).back());
}

MlpGradients mlp_gradients(const MlpMap& m, const Matrix& batch_in, const Matrix& batch_target) {
  validate_net(m);
  require_same_count(batch_in, batch_target, "mlp_gradients");
  if (batch_in.rows() != m.input_size() || batch_target.rows() != m.output_size()) {
    fail_invalid("batch shapes " + dims(batch_in) + " and " + dims(batch_target) + " do not fit the network");
  }
  return backward_rows(m, forward_rows(m, transpose(batch_in)), transpose(batch_target));
}

double mlp_loss(const MlpMap& m, const Matrix& inputs, const Matrix& targets) {
  require_same_count(inputs, targets, "mlp_loss");
  const Matrix pred = mlp_forward_all(m, inputs);
  if (pred.rows() != targets.rows()) fail_invalid("mlp_loss: target rows do not match the network output");
  return squared_error_rows(pred, targets) / static_cast<double>(inputs.cols());
}

TrainSchedule TrainSchedule::reference(std::uint64_t seed) { return {{{1e-3, 1000}, {1e-5, 1000}}, 40, seed}; }

std::size_t TrainSchedule::total_epochs() const {
  std::size_t n = 0;
  for (const LearningPhase& p : phases) n += p.epochs;
  return n;
}

TrainResult mlp_train(const std::vector<std::size_t>& layer_sizes, const Matrix& inputs, const Matrix& targets,
                      const TrainSchedule& schedule, Activation activation) {
  return mlp_train_from(make_mlp(layer_sizes, activation, schedule.seed), inputs, targets, schedule);
}

TrainResult mlp_train_from(MlpMap init, const Matrix& inputs, const Matrix& targets, const TrainSchedule& schedule) {
  validate_net(init);
  validate_schedule(schedule);
  require_same_count(inputs, targets, "mlp_train");
  if (inputs.rows() != init.input_size() || targets.rows() != init.output_size()) {
    fail_invalid("training data " + dims(inputs) + " -> " + dims(targets) + " does not fit layer sizes " +
                 std::to_string(init.input_size()) + " -> " + std::to_string(init.output_size()));
  }

  TrainResult result{std::move(init), {}};
  MlpMap& net = result.model;
  const Matrix in_rows = transpose(inputs);
  const Matrix target_rows = transpose(targets);
  const std::size_t n = inputs.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(schedule.seed, 1));

  std::size_t epoch = 0;
  for (const LearningPhase& phase : schedule.phases) {
    for (std::size_t e = 0; e < phase.epochs; ++e, ++epoch) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
      double total = 0.0;
      for (std::size_t start = 0; start < n; start += schedule.batch_size) {
        const std::span<const std::size_t> idx(order.data() + start, std::min(schedule.batch_size, n - start));
        const MlpGradients g = backward_rows(net, forward_rows(net, gather_rows(in_rows, idx)),
                                             gather_rows(target_rows, idx));
        if (!std::isfinite(g.loss)) fail_numerical("MLP training diverged at epoch " + std::to_string(epoch));
        total += g.loss * static_cast<double>(idx.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
          auto w = net.layers[l].weights.data();
          const auto gw = g.weights[l].data();
          for (std::size_t i = 0; i < w.size(); ++i) w[i] -= phase.learning_rate * gw[i];
          for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
            net.layers[l].bias[i] -= phase.learning_rate * g.biases[l][i];
        }
      }
      result.loss_history.push_back(total / static_cast<double>(n));
    }
  }
  return result;
}

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::LowDim: return "lowdim";
    case MapKind::Direct: return "direct";
    case MapKind::Mlp: return "mlp";
  }
  return "?";
}

MapKind parse_map_kind(std::string_view name) {
  if (name == "lowdim") return MapKind::LowDim;
  if (name == "direct") return MapKind::Direct;
  if (name == "mlp") return MapKind::Mlp;
  fail_invalid("unknown method '" + std::string(name) + "' (expected lowdim, direct or mlp)");
}

std::string encode_map(const StoredMap& map) {
  validate_net(map.net);
  nlohmann::json header = {{"format", "map"},
                           {"format_version", kMapVersion},
                           {"kind", to_string(map.kind)},
                           {"layer_sizes", map.net.layer_sizes},
                           {"activation", to_string(map.net.activation)}};
  Vector payload;
  for (const MlpLayer& layer : map.net.layers) {
    payload.insert(payload.end(), layer.weights.data().begin(), layer.weights.data().end());
    payload.insert(payload.end(), layer.bias.begin(), layer.bias.end());
  }
  return io::encode_blob(header, payload);
}

StoredMap decode_map(std::string_view bytes) {
  const io::Blob blob = io::decode_blob(bytes);
  if (blob.header.value("format", "") != "map") fail_format("not a mapping (.map) file");
  if (blob.header.value("format_version", 0) != kMapVersion) fail_format("unsupported .map format_version");
  StoredMap out;
  try {
    out.kind = parse_map_kind(blob.header.at("kind").get<std::string>());
    out.net.layer_sizes = blob.header.at("layer_sizes").get<std::vector<std::size_t>>();
    out.net.activation = parse_activation(blob.header.at("activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail_format(std::string("malformed .map header: ") + e.what());
  } catch (const Error& e) {
    fail_format(std::string("malformed .map header: ") + e.what());
  }
  const auto& sizes = out.net.layer_sizes;
  if (sizes.size() < 2) fail_format(".map needs at least two layer sizes");
  std::size_t want = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) want += sizes[l + 1] * sizes[l] + sizes[l + 1];
  if (blob.values.size() < want) fail_format("unexpected end of file");
  if (blob.values.size() > want) fail_format(".map payload longer than its header declares");
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t rows = sizes[l + 1], cols = sizes[l];
    auto first = blob.values.begin() + static_cast<std::ptrdiff_t>(at);
    MlpLayer layer{Matrix(rows, cols, Vector(first, first + static_cast<std::ptrdiff_t>(rows * cols))), {}};
    at += rows * cols;
    first = blob.values.begin() + static_cast<std::ptrdiff_t>(at);
    layer.bias.assign(first, first + static_cast<std::ptrdiff_t>(rows));
    at += rows;
    out.net.layers.push_back(std::move(layer));
  }
  return out;
}

void save_map(const std::filesystem::path& path, const StoredMap& map) { io::write_file_atomic(path, encode_map(map)); }

StoredMap load_map(const std::filesystem::path& path) { return decode_map(io::read_file(path)); }

}  // namespace invrender
