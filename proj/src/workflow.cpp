#include "invrender/workflow.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "invrender/error.hpp"
#include "invrender/io.hpp"

namespace invrender {

namespace {

struct Stats {
  double min = 0.0, max = 0.0, mean = 0.0;
};

Stats stats(std::span<const double> v) {
  if (v.empty()) return {};
  Stats s{v[0], v[0], 0.0};
  for (double x : v) {
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    s.mean += x;
  }
  s.mean /= static_cast<double>(v.size());
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string range_line(const char* key, std::span<const double> v) {
  const Stats s = stats(v);
  return std::string(key) + ": min " + fmt(s.min) + ", max " + fmt(s.max) + ", mean " + fmt(s.mean) + "\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Subspaces load_subspaces(const fs::path& model_dir) {
  Subspaces s;
  s.image = load_subspace(model_dir / "image.ssm");
  s.shape = load_subspace(model_dir / "shape.ssm");
  return s;
}

std::string dim_mismatch(const char* what, std::size_t got, const std::string& model, std::size_t want) {
  return std::string(what) + " dimension " + std::to_string(got) + " does not match the " + model + " dimension " +
         std::to_string(want);
}

PointCloud load_cloud(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".voxr") return cloud_from_voxels(io::read_voxr(path));
  if (ext == ".ply") return io::read_ply(path).cloud;
  fail_invalid(path.string() + ": expected a .voxr or .ply shape");
}

std::string sample_name(const SplitRow& row) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "s%06zu_v%zu", row.shape_id, row.view);
  return buf;
}

std::string describe_pgm(std::string_view bytes) {
  const Image2D img = io::decode_pgm(bytes);
  std::size_t lit = 0;
  for (double p : img.pixels) lit += p > 0.0;
  return "type: pgm\nwidth: " + std::to_string(img.width) + "\nheight: " + std::to_string(img.height) +
         "\nnonzero_pixels: " + std::to_string(lit) + "\n" + range_line("pixels", img.pixels);
}

std::string describe_voxr(std::string_view bytes) {
  const VoxelGrid g = io::decode_voxr(bytes);
  return "type: voxr\nresolution: " + std::to_string(g.resolution()) + "\noccupied: " +
         std::to_string(g.occupied_count()) + "\nfill_fraction: " +
         fmt(static_cast<double>(g.occupied_count()) / static_cast<double>(g.cell_count())) + "\n";
}

std::string describe_ply(std::string_view bytes) {
  const io::PlyData ply = io::decode_ply(bytes);
  std::string out = "type: ply\nvertices: " + std::to_string(ply.cloud.points.size()) + "\ncorrespondence_id: " +
                    (ply.cloud.correspondence_id.empty() ? "(none)" : ply.cloud.correspondence_id) +
                    "\nerror_property: " + (ply.errors.empty() ? "no" : "yes") + "\n";
  if (!ply.cloud.points.empty()) {
    std::vector<double> xs, ys, zs;
    for (const Point3& p : ply.cloud.points) {
      xs.push_back(p.x);
      ys.push_back(p.y);
      zs.push_back(p.z);
    }
    out += range_line("x", xs) + range_line("y", ys) + range_line("z", zs);
  }
  if (!ply.errors.empty()) out += range_line("error", ply.errors);
  return out;
}

std::string describe_blob(std::string_view bytes, const fs::path& path) {
  const io::Blob blob = io::decode_blob(bytes);
  const std::string format = blob.header.value("format", "");
  const std::string version = "format_version: " + std::to_string(blob.header.value("format_version", 0)) + "\n";
  if (format == "ssm") {
    const SubspaceModel m = decode_ssm(bytes);
    std::string out = "type: ssm\n" + version + "dim: " + std::to_string(m.dim()) + "\nk: " + std::to_string(m.k()) +
                      "\nrequested_k: " + std::to_string(m.requested_k) + "\nrank_reduced: " +
                      (m.rank_reduced() ? "yes" : "no") + "\n" + range_line("mean", m.mean);
    out += "singular_values:";
    const std::size_t shown = std::min<std::size_t>(m.singular_values.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) out += " " + fmt(m.singular_values[i]);
    if (shown < m.singular_values.size()) out += " ... " + fmt(m.singular_values.back());
    return out + "\n";
  }
  if (format == "map") {
    const StoredMap m = decode_map(bytes);
    std::string sizes;
    std::size_t params = 0;
    for (std::size_t s : m.net.layer_sizes) sizes += (sizes.empty() ? "" : ",") + std::to_string(s);
    std::vector<double> weights;
    for (const MlpLayer& l : m.net.layers) {
      params += l.weights.size() + l.bias.size();
      weights.insert(weights.end(), l.weights.data().begin(), l.weights.data().end());
    }
    return "type: map\n" + version + "kind: " + std::string(to_string(m.kind)) + "\nlayer_sizes: " + sizes +
           "\nactivation: " + std::string(to_string(m.net.activation)) + "\nparameters: " + std::to_string(params) +
           "\n" + range_line("weights", weights);
  }
  if (format == "matrix") {
    const Matrix m = io::read_matrix(path);
    return "type: matrix\n" + version + "rows: " + std::to_string(m.rows()) + "\ncols: " + std::to_string(m.cols()) + "\n" +
           range_line("values", m.data());
  }
  fail_format("unknown blob format '" + format + "'");
}

std::string describe_dataset(const fs::path& dir) {
  const DatasetManifest m = load_manifest(dir);
  std::string out = "type: dataset\nmodality: " + std::string(to_string(m.modality)) +
                    "\nimage_dim: " + std::to_string(m.image_dim()) + "\nshape_dim: " + std::to_string(m.shape_dim()) +
                    "\n";
  for (const char* split : {kSplitUnlabeled2d, kSplitUnlabeled3d, kSplitTrain, kSplitTest})
    out += std::string("rows_") + split + ": " + std::to_string(read_split(dir, split).size()) + "\n";
  return out + "\n" + format_manifest(m);
}

}  // namespace

ExperimentConfig bind_dataset(ExperimentConfig config, const fs::path& data) {
  config.dataset = load_manifest(data);
  return config;
}

std::string map_file_name(MapKind kind) { return "mapping_" + std::string(to_string(kind)) + ".map"; }

RunLog run_generate(const ExperimentConfig& config, const fs::path& out, std::size_t threads) {
  generate_dataset(config.dataset, out, threads);
  RunLog log;
  for (const char* split : {kSplitUnlabeled2d, kSplitUnlabeled3d, kSplitTrain, kSplitTest})
    log.summary += std::string(split) + ": " + std::to_string(read_split(out, split).size()) + " rows\n";
  return log;
}

RunLog run_pretrain(const ExperimentConfig& config_in, const fs::path& data, const fs::path& out,
                    std::size_t threads) {
  const ExperimentConfig config = bind_dataset(config_in, data);
  const Subspaces s = pretrain(data, config.k_2d, config.k_3d, threads);
  fs::create_directories(out);
  save_subspace(out / "image.ssm", s.image);
  save_subspace(out / "shape.ssm", s.shape);

  std::ostringstream text;
  text << "image_dim: " << s.image.dim() << "\nk_2d: " << s.image.k() << " (requested " << config.k_2d << ")\n"
       << "image_pool: " << read_split(data, kSplitUnlabeled2d).size() << "\n"
       << "shape_dim: " << s.shape.dim() << "\nk_3d: " << s.shape.k() << " (requested " << config.k_3d << ")\n"
       << "shape_pool: " << read_split(data, kSplitUnlabeled3d).size() << "\n";
  for (const std::string& w : s.warnings) text << "warning: " << w << "\n";
  io::write_file_atomic(out / "pretrain.txt", text.str());
  return {text.str(), s.warnings};
}

RunLog run_fit(const ExperimentConfig& config_in, const fs::path& data, const fs::path& model_dir,
               const fs::path& out, std::size_t threads) {
  const ExperimentConfig config = bind_dataset(config_in, data);
  const Subspaces models = config.method == MapKind::Direct ? Subspaces{} : load_subspaces(model_dir);
  const DatasetManifest& manifest = config.dataset;
  const auto rows = read_split(data, kSplitTrain);
  const Matrix x = load_images(data, rows, threads);
  const Matrix z = load_shapes(data, manifest, rows, threads);

  const auto start = std::chrono::steady_clock::now();
  const MappingModel map = fit_mapping(config, models, x, z);
  const double seconds = seconds_since(start);
  const double train_rmse = evaluate_rmse(reconstruct_all(models, map, x), z).average_rmse;

  fs::create_directories(out);
  save_map(out / map_file_name(map.kind), to_stored(map));
  if (map.kind == MapKind::Mlp) {
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < map.loss_history.size(); ++e)
      csv += std::to_string(e + 1) + "," + format_double(map.loss_history[e]) + "\n";
    io::write_file_atomic(out / "loss_mlp.csv", csv);
  }
  RunLog log;
  log.summary = "method: " + std::string(to_string(map.kind)) + "\npairs: " + std::to_string(x.cols()) +
                "\ntrain_rmse: " + format_double(train_rmse) + "\nseconds: " + fmt(seconds) + "\n";
  return log;
}

RunLog run_eval(const ExperimentConfig& config_in, const fs::path& data, const fs::path& model_dir,
                const std::string& split, const fs::path& out, std::size_t export_count, std::size_t threads) {
  if (split != kSplitTrain && split != kSplitTest)
    fail_invalid("unknown split '" + split + "' (expected train or test)");
  const ExperimentConfig config = bind_dataset(config_in, data);
  const auto start = std::chrono::steady_clock::now();
  const MappingModel map = from_stored(load_map(model_dir / map_file_name(config.method)));
  const bool direct = map.kind == MapKind::Direct;
  const Subspaces models = direct ? Subspaces{} : load_subspaces(model_dir);
  const std::string in_model = direct ? "direct map input" : "image model";
  const std::string out_model = direct ? "direct map output" : "shape model";
  const std::size_t in_dim = direct ? map.direct.input_size() : models.image.dim();
  const std::size_t out_dim = direct ? map.direct.output_size() : models.shape.dim();

  const auto rows = read_split(data, split);
  const Matrix x = load_images(data, rows, threads);
  if (x.rows() != in_dim) fail_invalid(dim_mismatch("image", x.rows(), in_model, in_dim));
  const Matrix z = load_shapes(data, config.dataset, rows, threads);
  if (z.rows() != out_dim) fail_invalid(dim_mismatch("shape", z.rows(), out_model, out_dim));

  const Matrix pred = reconstruct_all(models, map, x);
  const EvaluationReport report = evaluate_rmse(pred, z);
  const double seconds = seconds_since(start);

  const std::string tag = std::string(to_string(map.kind)) + "_" + split;
  fs::create_directories(out);
  std::string csv = "sample,shape_id,view,rmse\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(rows[i].shape_id) + "," + std::to_string(rows[i].view) + "," +
           format_double(report.per_sample_rmse[i]) + "\n";
  io::write_file_atomic(out / ("eval_" + tag + ".csv"), csv);
  io::write_matrix(out / ("predictions_" + tag + ".dmat"), pred);
  io::write_matrix(out / ("truth_" + split + ".dmat"), z);

  RunLog log;
  const std::size_t exports = std::min(export_count, rows.size());
  if (exports > 0) fs::create_directories(out / "export");
  for (std::size_t i = 0; i < exports; ++i) {
    const fs::path base = out / "export" / sample_name(rows[i]);
    const Vector p = pred.column(i), t = z.column(i);
    if (config.dataset.modality == Modality::Voxel) {
      const std::size_t res = config.dataset.resolution;
      const VoxelGrid pg = voxels_from_vector(p, res), tg = voxels_from_vector(t, res);
      io::write_voxr(base.string() + "_pred.voxr", pg);
      io::write_voxr(base.string() + "_truth.voxr", tg);
      const PointCloud pc = cloud_from_voxels(pg), tc = cloud_from_voxels(tg);
      if (pc.points.empty()) {
        log.warnings.push_back(sample_name(rows[i]) + ": prediction has no occupied voxels; heat map skipped");
        continue;
      }
      const HeatMap h = heatmap(pc, tc, HeatMode::Nearest);
      io::write_ply(base.string() + "_heat.ply", tc, &h.errors);
    } else {
      const PointCloud tc = io::read_ply(data / rows[i].shape).cloud;
      const PointCloud pc = cloud_from_vector(p, tc.correspondence_id);
      io::write_ply(base.string() + "_pred.ply", pc);
      const HeatMap h = heatmap(pc, tc, HeatMode::Corresponded);
      io::write_ply(base.string() + "_heat.ply", tc, &h.errors);
    }
  }

  log.summary = "method: " + std::string(to_string(map.kind)) + "\nsplit: " + split + "\nsamples: " +
                std::to_string(rows.size()) + "\naverage_rmse: " + format_double(report.average_rmse) +
                "\nseconds: " + fmt(seconds) + "\n";
  io::write_file_atomic(out / ("eval_" + tag + ".txt"), log.summary + "\nconfig:\n" + format_config(config));
  return log;
}

RunLog run_compare(const ExperimentConfig& config_in, const fs::path& data_in, const fs::path& out,
                   std::size_t threads) {
  fs::path data = data_in;
  if (data.empty()) {
    data = out / "data";
    generate_dataset(config_in.dataset, data, threads);
  }
  const ExperimentConfig config = bind_dataset(config_in, data);
  const ComparisonReport report = compare_methods(config, data, threads);
  fs::create_directories(out);
  io::write_file_atomic(out / "comparison.csv", comparison_csv(report));
  const std::string summary = comparison_summary(report, config);
  io::write_file_atomic(out / "comparison.txt", summary);
  return {summary, report.warnings};
}

void run_render(const fs::path& shape, double yaw_deg, std::size_t width, std::size_t height, const fs::path& out) {
  if (width == 0 || height == 0) fail_invalid("render: width and height must be positive");
  const std::string ext = shape.extension().string();
  Image2D img;
  if (ext == ".voxr") {
    img = render_depth(io::read_voxr(shape), Pose(yaw_deg), width, height);
  } else if (ext == ".ply") {
    img = render_depth(io::read_ply(shape).cloud, Pose(yaw_deg), width, height);
  } else {
    fail_invalid(shape.string() + ": expected a .voxr or .ply shape");
  }
  io::write_pgm(out, img);
}

RunLog run_heatmap(const fs::path& prediction, const fs::path& truth, HeatMode mode, const fs::path& out) {
  const PointCloud pc = load_cloud(prediction), tc = load_cloud(truth);
  const HeatMap h = heatmap(pc, tc, mode);
  io::write_ply(out, tc, &h.errors);
  const Stats s = stats(h.errors);
  RunLog log;
  log.summary = "mode: " + std::string(to_string(mode)) + "\npoints: " + std::to_string(h.errors.size()) +
                "\nmean_error: " + fmt(s.mean) + "\nmax_error: " + fmt(s.max) + "\n";
  return log;
}

std::string inspect(const fs::path& path) {
  if (fs::is_directory(path)) return describe_dataset(path);
  if (path.extension() == ".cfg") return "type: config\n\n" + format_config(load_config(path));
  const std::string bytes = io::read_file(path);
  try {
    if (bytes.rfind("P5", 0) == 0) return describe_pgm(bytes);
    if (bytes.rfind("VOXR", 0) == 0) return describe_voxr(bytes);
    if (bytes.rfind("ply", 0) == 0) return describe_ply(bytes);
    if (!bytes.empty() && bytes.front() == '{') return describe_blob(bytes, path);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
  fail_format(path.string() + ": unrecognized file format");
}

}  // namespace invrender
