#include "invrender/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "invrender/error.hpp"
#include "invrender/io.hpp"

namespace invrender {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    fail_invalid(where + ": cannot parse '" + text + "' as " +
                 (std::is_floating_point_v<T> ? "a number" : "a non-negative integer"));
  }
  return value;
}

template <typename T>
std::string join(const std::vector<T>& values, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

ViewMode parse_view_mode(const std::string& s, const std::string& where) {
  if (s == "one") return ViewMode::One;
  if (s == "all") return ViewMode::All;
  fail_invalid(where + ": expected 'one' or 'all', got '" + s + "'");
}

Modality parse_modality(const std::string& s, const std::string& where) {
  if (s == "voxel") return Modality::Voxel;
  if (s == "cloud") return Modality::Cloud;
  fail_invalid(where + ": expected 'voxel' or 'cloud', got '" + s + "'");
}

// Reads every key of one INI section through a handler table so that
// unknown keys can be reported.
using Handler = std::function<void(const std::string& value, const std::string& where)>;

void apply_section(const pt::ptree& section, const std::string& name, const std::map<std::string, Handler>& handlers) {
  for (const auto& [key, node] : section) {
    const std::string where = "[" + name + "] " + key;
    const auto it = handlers.find(key);
    if (it == handlers.end()) fail_invalid("config: unknown key " + where);
    it->second(trim(node.data()), "config: " + where);
  }
}

std::string manifest_section(const DatasetManifest& m) {
  std::ostringstream out;
  out << "[dataset]\n"
      << "modality = " << to_string(m.modality) << "\n"
      << "shape_kinds = " << join(m.shape_kinds, [](ShapeKind k) { return std::string(to_string(k)); }) << "\n"
      << "unlabeled_2d = " << m.unlabeled_2d << "\n"
      << "unlabeled_3d = " << m.unlabeled_3d << "\n"
      << "paired_train = " << m.paired_train << "\n"
      << "paired_test = " << m.paired_test << "\n"
      << "resolution = " << m.resolution << "\n"
      << "point_count = " << m.point_count << "\n"
      << "image_width = " << m.image_width << "\n"
      << "image_height = " << m.image_height << "\n"
      << "view_count = " << m.view_count << "\n"
      << "poses = " << join(m.yaws, format_double) << "\n"
      << "unlabeled_views = " << to_string(m.unlabeled_views) << "\n"
      << "paired_views = " << to_string(m.paired_views) << "\n"
      << "seed = " << m.seed << "\n";
  return out.str();
}

std::string id_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", id);
  return buf;
}

struct ShapeJob {
  std::size_t id = 0;
  ShapeKind kind = ShapeKind::Box;
  bool write_shape = false;
  std::vector<std::size_t> views;
};

std::string shape_file(const DatasetManifest& m, std::size_t id) {
  return "shapes/" + id_name(id) + (m.modality == Modality::Voxel ? ".voxr" : ".ply");
}

std::string image_file(std::size_t id, std::size_t view) {
  return "images/" + id_name(id) + "_v" + std::to_string(view) + ".pgm";
}

std::uint64_t shape_seed(const DatasetManifest& m, std::size_t id) { return derive_seed(m.seed, id); }

ShapeKind shape_kind_for(const DatasetManifest& m, std::size_t id) {
  return m.shape_kinds[derive_seed(shape_seed(m, id), 1) % m.shape_kinds.size()];
}

std::size_t chosen_view(const DatasetManifest& m, std::size_t id, std::size_t pose_count) {
  return derive_seed(shape_seed(m, id), 2) % pose_count;
}

std::vector<std::size_t> views_for(const DatasetManifest& m, std::size_t id, ViewMode mode, std::size_t pose_count) {
  if (mode == ViewMode::One) return {chosen_view(m, id, pose_count)};
  std::vector<std::size_t> all(pose_count);
  for (std::size_t i = 0; i < pose_count; ++i) all[i] = i;
  return all;
}

std::string split_csv(const std::vector<SplitRow>& rows) {
  std::string out = "shape_id,kind,view,yaw_deg,image,shape\n";
  for (const SplitRow& r : rows) {
    out += std::to_string(r.shape_id) + "," + std::string(to_string(r.kind)) + "," + std::to_string(r.view) + "," +
           format_double(r.yaw_deg) + "," + r.image + "," + r.shape + "\n";
  }
  return out;
}

std::string dim_mismatch(const char* what, std::size_t got, const char* model, std::size_t want) {
  return std::string(what) + " dimension " + std::to_string(got) + " does not match the " + model + " dimension " +
         std::to_string(want);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view to_string(Modality m) { return m == Modality::Voxel ? "voxel" : "cloud"; }
std::string_view to_string(ViewMode m) { return m == ViewMode::One ? "one" : "all"; }

std::vector<Pose> DatasetManifest::poses() const {
  if (yaws.empty()) return view_poses(view_count);
  std::vector<Pose> out;
  for (double y : yaws) out.emplace_back(y);
  return out;
}

std::size_t DatasetManifest::shape_dim() const {
  return modality == Modality::Voxel ? resolution * resolution * resolution : 3 * point_count;
}

void DatasetManifest::validate() const {
  if (shape_kinds.empty()) fail_invalid("dataset: shape_kinds is empty");
  if (unlabeled_2d < 2 || unlabeled_3d < 2) fail_invalid("dataset: unlabeled pools need at least 2 shapes each");
  if (paired_train < 1 || paired_test < 1) fail_invalid("dataset: paired_train and paired_test must be positive");
  if (modality == Modality::Voxel && (resolution < 8 || resolution > 64))
    fail_invalid("dataset: resolution must lie in [8, 64], got " + std::to_string(resolution));
  if (modality == Modality::Cloud) {
    if (point_count < 4) fail_invalid("dataset: point_count must be at least 4");
    std::set<ShapeKind> kinds(shape_kinds.begin(), shape_kinds.end());
    if (kinds.size() != 1 || *kinds.begin() == ShapeKind::Composite)
      fail_invalid("dataset: point clouds need exactly one non-composite shape kind so that points correspond");
  }
  if (image_width < 1 || image_height < 1 || image_width > 1024 || image_height > 1024)
    fail_invalid("dataset: image size must lie in [1, 1024] per side");
  if (yaws.empty() && view_count < 1) fail_invalid("dataset: view_count must be positive");
  for (double y : yaws)
    if (!std::isfinite(y)) fail_invalid("dataset: poses must be finite");
}

TrainSchedule ExperimentConfig::schedule() const {
  return TrainSchedule{phases, batch_size, derive_seed(train_seed.value_or(dataset.seed), 0x6d6c70)};
}

void ExperimentConfig::validate() const {
  dataset.validate();
  if (k_2d < 1 || k_3d < 1) fail_invalid("model: k_2d and k_3d must be positive");
  if (batch_size < 1) fail_invalid("train: batch_size must be positive");
  for (std::size_t h : mlp_hidden)
    if (h < 1) fail_invalid("model: mlp_hidden sizes must be positive");
  for (const LearningPhase& p : phases) {
    if (!(p.learning_rate > 0.0) || !std::isfinite(p.learning_rate))
      fail_invalid("train: learning rates must be positive");
    if (p.epochs < 1) fail_invalid("train: epochs must be positive");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail_invalid("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig c;
  DatasetManifest& d = c.dataset;
  auto size_key = [](std::size_t& dst) {
    return [&dst](const std::string& v, const std::string& w) { dst = parse_number<std::size_t>(v, w); };
  };
  const std::map<std::string, Handler> dataset_keys = {
      {"modality", [&](const std::string& v, const std::string& w) { d.modality = parse_modality(v, w); }},
      {"shape_kinds",
       [&](const std::string& v, const std::string& w) {
         d.shape_kinds.clear();
         for (const std::string& s : split_list(v)) {
           try {
             d.shape_kinds.push_back(parse_shape_kind(s));
           } catch (const Error& e) {
             fail_invalid(w + ": " + e.what());
           }
         }
       }},
      {"unlabeled_2d", size_key(d.unlabeled_2d)},
      {"unlabeled_3d", size_key(d.unlabeled_3d)},
      {"paired_train", size_key(d.paired_train)},
      {"paired_test", size_key(d.paired_test)},
      {"resolution", size_key(d.resolution)},
      {"point_count", size_key(d.point_count)},
      {"image_width", size_key(d.image_width)},
      {"image_height", size_key(d.image_height)},
      {"view_count", size_key(d.view_count)},
      {"poses",
       [&](const std::string& v, const std::string& w) {
         d.yaws.clear();
         for (const std::string& s : split_list(v)) d.yaws.push_back(parse_number<double>(s, w));
       }},
      {"unlabeled_views", [&](const std::string& v, const std::string& w) { d.unlabeled_views = parse_view_mode(v, w); }},
      {"paired_views", [&](const std::string& v, const std::string& w) { d.paired_views = parse_view_mode(v, w); }},
      {"seed", [&](const std::string& v, const std::string& w) { d.seed = parse_number<std::uint64_t>(v, w); }},
  };
  const std::map<std::string, Handler> model_keys = {
      {"k_2d", size_key(c.k_2d)},
      {"k_3d", size_key(c.k_3d)},
      {"method",
       [&](const std::string& v, const std::string& w) {
         try {
           c.method = parse_map_kind(v);
         } catch (const Error& e) {
           fail_invalid(w + ": " + e.what());
         }
       }},
      {"mlp_hidden",
       [&](const std::string& v, const std::string& w) {
         c.mlp_hidden.clear();
         for (const std::string& s : split_list(v)) c.mlp_hidden.push_back(parse_number<std::size_t>(s, w));
       }},
  };
  std::vector<double> rates;
  std::vector<std::size_t> epochs;
  bool rates_set = false, epochs_set = false;
  const std::map<std::string, Handler> train_keys = {
      {"learning_rates",
       [&](const std::string& v, const std::string& w) {
         rates_set = true;
         for (const std::string& s : split_list(v)) rates.push_back(parse_number<double>(s, w));
       }},
      {"epochs",
       [&](const std::string& v, const std::string& w) {
         epochs_set = true;
         for (const std::string& s : split_list(v)) epochs.push_back(parse_number<std::size_t>(s, w));
       }},
      {"batch_size", size_key(c.batch_size)},
      {"seed", [&](const std::string& v, const std::string& w) { c.train_seed = parse_number<std::uint64_t>(v, w); }},
  };

  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) fail_invalid("config: key '" + name + "' is outside any section");
    if (name == "dataset") {
      apply_section(section, name, dataset_keys);
    } else if (name == "model") {
      apply_section(section, name, model_keys);
    } else if (name == "train") {
      apply_section(section, name, train_keys);
    } else {
      fail_invalid("config: unknown section [" + name + "]");
    }
  }
  if (rates_set != epochs_set) fail_invalid("config: [train] learning_rates and epochs must be given together");
  if (rates_set) {
    if (rates.size() != epochs.size())
      fail_invalid("config: [train] learning_rates has " + std::to_string(rates.size()) + " entries but epochs has " +
                   std::to_string(epochs.size()));
    c.phases.clear();
    for (std::size_t i = 0; i < rates.size(); ++i) c.phases.push_back({rates[i], epochs[i]});
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  try {
    return parse_config(io::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput) fail_invalid(path.string() + ": " + e.what());
    throw;
  }
}

std::string format_manifest(const DatasetManifest& manifest) { return manifest_section(manifest); }

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << manifest_section(c.dataset) << "\n[model]\n"
      << "k_2d = " << c.k_2d << "\n"
      << "k_3d = " << c.k_3d << "\n"
      << "method = " << to_string(c.method) << "\n"
      << "mlp_hidden = " << join(c.mlp_hidden, [](std::size_t h) { return std::to_string(h); }) << "\n"
      << "\n[train]\n"
      << "learning_rates = " << join(c.phases, [](const LearningPhase& p) { return format_double(p.learning_rate); })
      << "\n"
      << "epochs = " << join(c.phases, [](const LearningPhase& p) { return std::to_string(p.epochs); }) << "\n"
      << "batch_size = " << c.batch_size << "\n";
  if (c.train_seed) out << "seed = " << *c.train_seed << "\n";
  return out.str();
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void generate_dataset(const DatasetManifest& m, const fs::path& out, std::size_t threads) {
  m.validate();
  const std::vector<Pose> poses = m.poses();
  std::vector<ShapeJob> jobs;
  std::map<std::string, std::vector<SplitRow>> splits;

  std::size_t next_id = 0;
  auto add_split = [&](const char* name, std::size_t count, bool images, ViewMode mode, bool shapes) {
    auto& rows = splits[name];
    for (std::size_t i = 0; i < count; ++i) {
      ShapeJob job{next_id++, {}, shapes, {}};
      job.kind = shape_kind_for(m, job.id);
      if (images) job.views = views_for(m, job.id, mode, poses.size());
      const std::string shape = shapes ? shape_file(m, job.id) : std::string();
      if (images) {
        for (std::size_t v : job.views)
          rows.push_back({job.id, job.kind, v, poses[v].yaw_deg(), image_file(job.id, v), shape});
      } else {
        rows.push_back({job.id, job.kind, 0, 0.0, {}, shape});
      }
      jobs.push_back(std::move(job));
    }
  };
  add_split(kSplitUnlabeled2d, m.unlabeled_2d, true, m.unlabeled_views, false);
  add_split(kSplitUnlabeled3d, m.unlabeled_3d, false, m.unlabeled_views, true);
  add_split(kSplitTrain, m.paired_train, true, m.paired_views, true);
  add_split(kSplitTest, m.paired_test, true, m.paired_views, true);

  fs::create_directories(out / "images");
  fs::create_directories(out / "shapes");
  fs::create_directories(out / "splits");

  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const ShapeJob& job = jobs[j];
    const ShapeSpec spec = random_shape_spec(job.kind, shape_seed(m, job.id));
    if (m.modality == Modality::Voxel) {
      const VoxelGrid grid = generate_voxel_shape(spec, m.resolution);
      if (job.write_shape) io::write_voxr(out / shape_file(m, job.id), grid);
      for (std::size_t v : job.views)
        io::write_pgm(out / image_file(job.id, v), render_depth(grid, poses[v], m.image_width, m.image_height));
    } else {
      const PointCloud cloud = generate_point_shape(spec, m.point_count);
      if (job.write_shape) io::write_ply(out / shape_file(m, job.id), cloud);
      for (std::size_t v : job.views)
        io::write_pgm(out / image_file(job.id, v), render_depth(cloud, poses[v], m.image_width, m.image_height));
    }
  });

  for (const auto& [name, rows] : splits) io::write_file_atomic(out / "splits" / (name + ".csv"), split_csv(rows));
  io::write_file_atomic(out / "manifest.cfg", format_manifest(m));
}

DatasetManifest load_manifest(const fs::path& data) {
  const fs::path path = data / "manifest.cfg";
  if (!fs::exists(path)) fail_invalid(data.string() + " is not a dataset directory (no manifest.cfg)");
  return load_config(path).dataset;
}

std::vector<SplitRow> read_split(const fs::path& data, std::string_view split) {
  const fs::path path = data / "splits" / (std::string(split) + ".csv");
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (trim(line) != "shape_id,kind,view,yaw_deg,image,shape") fail_format(path.string() + ": unexpected header");
  std::vector<SplitRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_list(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 6) fail_format(where + ": expected 6 fields, got " + std::to_string(f.size()));
    try {
      rows.push_back({parse_number<std::size_t>(f[0], where), parse_shape_kind(f[1]),
                      parse_number<std::size_t>(f[2], where), parse_number<double>(f[3], where), f[4], f[5]});
    } catch (const Error& e) {
      fail_format(e.what());
    }
  }
  return rows;
}

Matrix load_images(const fs::path& data, const std::vector<SplitRow>& rows, std::size_t threads) {
  if (rows.empty()) fail_invalid("no images to load");
  std::vector<Vector> columns(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    if (rows[i].image.empty()) fail_invalid("split row for shape " + std::to_string(rows[i].shape_id) + " has no image");
    columns[i] = vectorize(io::read_pgm(data / rows[i].image));
  });
  for (const Vector& c : columns)
    if (c.size() != columns.front().size()) fail_invalid("images in one split differ in size");
  return Matrix::from_columns(columns);
}

Matrix load_shapes(const fs::path& data, const DatasetManifest& manifest, const std::vector<SplitRow>& rows,
                   std::size_t threads) {
  if (rows.empty()) fail_invalid("no shapes to load");
  std::vector<Vector> columns(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    if (rows[i].shape.empty()) fail_invalid("split row for shape " + std::to_string(rows[i].shape_id) + " has no shape");
    const fs::path path = data / rows[i].shape;
    if (manifest.modality == Modality::Voxel) {
      const VoxelGrid g = io::read_voxr(path);
      if (g.resolution() != manifest.resolution)
        fail_invalid(path.string() + ": resolution " + std::to_string(g.resolution()) + " differs from the manifest's " +
                     std::to_string(manifest.resolution));
      columns[i] = vectorize(g);
    } else {
      const PointCloud c = io::read_ply(path).cloud;
      if (c.points.size() != manifest.point_count)
        fail_invalid(path.string() + ": " + std::to_string(c.points.size()) + " points, manifest says " +
                     std::to_string(manifest.point_count));
      columns[i] = vectorize(c);
    }
  });
  return Matrix::from_columns(columns);
}

Subspaces fit_subspaces(const Matrix& images, const Matrix& shapes, std::size_t k_2d, std::size_t k_3d) {
  Subspaces out;
  auto fit = [&](const Matrix& x, std::size_t k, const char* name) {
    const std::size_t cap = std::min(x.rows(), x.cols());
    if (k > cap) {
      out.warnings.push_back(std::string(name) + ": requested k = " + std::to_string(k) +
                             " exceeds min(dim, samples) = " + std::to_string(cap) + "; using " + std::to_string(cap));
      k = cap;
    }
    SubspaceModel model = fit_subspace(x, k);
    if (model.rank_reduced()) {
      out.warnings.push_back(std::string(name) + ": pool rank allows only " + std::to_string(model.k()) +
                             " directions; k reduced from " + std::to_string(k));
    }
    return model;
  };
  out.image = fit(images, k_2d, "k_2d");
  out.shape = fit(shapes, k_3d, "k_3d");
  return out;
}

Subspaces pretrain(const fs::path& data, std::size_t k_2d, std::size_t k_3d, std::size_t threads) {
  const DatasetManifest manifest = load_manifest(data);
  const Matrix images = load_images(data, read_split(data, kSplitUnlabeled2d), threads);
  const Matrix shapes = load_shapes(data, manifest, read_split(data, kSplitUnlabeled3d), threads);
  return fit_subspaces(images, shapes, k_2d, k_3d);
}

MappingModel fit_mapping(const ExperimentConfig& config, const Subspaces& models, const Matrix& x, const Matrix& z) {
  if (x.cols() != z.cols())
    fail_invalid("paired data has " + std::to_string(x.cols()) + " images but " + std::to_string(z.cols()) + " shapes");
  MappingModel out;
  out.kind = config.method;
  if (config.method == MapKind::Direct) {
    out.direct = fit_direct_map(x, z);
    return out;
  }
  if (x.rows() != models.image.dim()) fail_invalid(dim_mismatch("image", x.rows(), "image model", models.image.dim()));
  if (z.rows() != models.shape.dim()) fail_invalid(dim_mismatch("shape", z.rows(), "shape model", models.shape.dim()));
  const Matrix y = encode_all(models.image, x);
  const Matrix b = encode_all(models.shape, z);
  if (config.method == MapKind::LowDim) {
    out.linear = fit_linear_map(y, b);
  } else {
    std::vector<std::size_t> sizes = {models.image.k()};
    sizes.insert(sizes.end(), config.mlp_hidden.begin(), config.mlp_hidden.end());
    sizes.push_back(models.shape.k());
    TrainResult trained = mlp_train(sizes, y, b, config.schedule());
    out.mlp = std::move(trained.model);
    out.loss_history = std::move(trained.loss_history);
  }
  return out;
}

Matrix reconstruct_all(const Subspaces& models, const MappingModel& map, const Matrix& x) {
  switch (map.kind) {
    case MapKind::Direct:
      if (x.rows() != map.direct.input_size())
        fail_invalid(dim_mismatch("image", x.rows(), "direct map input", map.direct.input_size()));
      return predict_all(map.direct, x);
    case MapKind::LowDim:
    case MapKind::Mlp: {
      if (x.rows() != models.image.dim()) fail_invalid(dim_mismatch("image", x.rows(), "image model", models.image.dim()));
      const Matrix y = encode_all(models.image, x);
      if (map.kind == MapKind::LowDim) {
        if (map.linear.t.cols() != models.image.k() || map.linear.t.rows() != models.shape.k())
          fail_invalid("linear map is " + std::to_string(map.linear.t.rows()) + "x" +
                       std::to_string(map.linear.t.cols()) + " but the subspaces have k_2d = " +
                       std::to_string(models.image.k()) + " and k_3d = " + std::to_string(models.shape.k()));
        return decode_all(models.shape, multiply(map.linear.t, y));
      }
      if (map.mlp.input_size() != models.image.k() || map.mlp.output_size() != models.shape.k())
        fail_invalid("MLP maps " + std::to_string(map.mlp.input_size()) + " -> " +
                     std::to_string(map.mlp.output_size()) + " but the subspaces have k_2d = " +
                     std::to_string(models.image.k()) + " and k_3d = " + std::to_string(models.shape.k()));
      return decode_all(models.shape, mlp_forward_all(map.mlp, y));
    }
  }
  fail_invalid("unknown mapping kind");
}

Vector reconstruct(const Subspaces& models, const MappingModel& map, const Image2D& image) {
  return reconstruct_all(models, map, Matrix::from_columns({vectorize(image)})).column(0);
}

StoredMap to_stored(const MappingModel& map) {
  switch (map.kind) {
    case MapKind::LowDim: return {map.kind, single_layer(map.linear.t)};
    case MapKind::Direct: {
      MlpMap net;
      net.layer_sizes = {map.direct.input_size(), map.direct.right.rows(), map.direct.output_size()};
      net.activation = Activation::Identity;
      net.layers = {{map.direct.right, Vector(map.direct.right.rows(), 0.0)},
                    {map.direct.left, Vector(map.direct.left.rows(), 0.0)}};
      return {map.kind, std::move(net)};
    }
    case MapKind::Mlp: return {map.kind, map.mlp};
  }
  fail_invalid("unknown mapping kind");
}

MappingModel from_stored(const StoredMap& stored) {
  MappingModel out;
  out.kind = stored.kind;
  if (stored.kind == MapKind::Mlp) {
    out.mlp = stored.net;
    return out;
  }
  if (stored.kind == MapKind::LowDim) {
    if (stored.net.layers.size() != 1) fail_format("a lowdim map must have exactly one layer");
    out.linear.t = stored.net.layers[0].weights;
  } else {
    if (stored.net.layers.size() != 2) fail_format("a direct map must have exactly two layers");
    out.direct.right = stored.net.layers[0].weights;
    out.direct.left = stored.net.layers[1].weights;
  }
  return out;
}

EvaluationReport evaluate_rmse(const Matrix& predictions, const Matrix& truths) {
  if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols()) {
    fail_invalid("predictions are " + std::to_string(predictions.rows()) + "x" + std::to_string(predictions.cols()) +
                 " but ground truth is " + std::to_string(truths.rows()) + "x" + std::to_string(truths.cols()));
  }
  if (predictions.cols() == 0 || predictions.rows() == 0) fail_invalid("evaluate_rmse: empty input");
  const std::size_t dim = predictions.rows(), n = predictions.cols();
  Vector sq(n, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    const auto p = predictions.row(r);
    const auto t = truths.row(r);
    for (std::size_t s = 0; s < n; ++s) sq[s] += (p[s] - t[s]) * (p[s] - t[s]);
  }
  EvaluationReport report;
  double total = 0.0;
  for (double v : sq) {
    report.per_sample_rmse.push_back(std::sqrt(v / static_cast<double>(dim)));
    total += report.per_sample_rmse.back();
  }
  report.average_rmse = total / static_cast<double>(n);
  return report;
}

std::string_view to_string(HeatMode m) { return m == HeatMode::Corresponded ? "corresponded" : "nearest"; }

HeatMode parse_heat_mode(std::string_view name) {
  if (name == "corresponded") return HeatMode::Corresponded;
  if (name == "nearest") return HeatMode::Nearest;
  fail_invalid("unknown heat-map mode '" + std::string(name) + "' (expected corresponded or nearest)");
}

HeatMap heatmap(const PointCloud& prediction, const PointCloud& truth, HeatMode mode) {
  HeatMap out{mode, {}};
  out.errors.reserve(truth.points.size());
  if (mode == HeatMode::Corresponded) {
    if (prediction.points.size() != truth.points.size() || prediction.correspondence_id != truth.correspondence_id) {
      fail_invalid("corresponded heat map needs matching clouds: prediction has " +
                   std::to_string(prediction.points.size()) + " points ('" + prediction.correspondence_id +
                   "'), truth has " + std::to_string(truth.points.size()) + " ('" + truth.correspondence_id + "')");
    }
    for (std::size_t i = 0; i < truth.points.size(); ++i)
      out.errors.push_back(distance(prediction.points[i], truth.points[i]));
    return out;
  }
  if (prediction.points.empty() && !truth.points.empty())
    fail_invalid("nearest-neighbor heat map needs a non-empty prediction");
  for (const Point3& t : truth.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point3& p : prediction.points) best = std::min(best, distance(p, t));
    out.errors.push_back(best);
  }
  return out;
}

ComparisonReport compare_methods(const ExperimentConfig& base, const fs::path& data, std::size_t threads) {
  const DatasetManifest manifest = load_manifest(data);
  const Subspaces models = pretrain(data, base.k_2d, base.k_3d, threads);
  const auto train_rows = read_split(data, kSplitTrain);
  const auto test_rows = read_split(data, kSplitTest);
  const Matrix x_train = load_images(data, train_rows, threads);
  const Matrix z_train = load_shapes(data, manifest, train_rows, threads);
  const Matrix x_test = load_images(data, test_rows, threads);
  const Matrix z_test = load_shapes(data, manifest, test_rows, threads);

  ComparisonReport report;
  report.k_2d = models.image.k();
  report.k_3d = models.shape.k();
  report.n_train = x_train.cols();
  report.n_test = x_test.cols();
  report.warnings = models.warnings;
  for (MapKind kind : {MapKind::LowDim, MapKind::Direct, MapKind::Mlp}) {
    ExperimentConfig config = base;
    config.method = kind;
    const auto start = std::chrono::steady_clock::now();
    const MappingModel map = fit_mapping(config, models, x_train, z_train);
    MethodScore score{kind, evaluate_rmse(reconstruct_all(models, map, x_train), z_train).average_rmse,
                      evaluate_rmse(reconstruct_all(models, map, x_test), z_test).average_rmse, 0.0};
    score.seconds = seconds_since(start);
    report.rows.push_back(score);
  }
  return report;
}

std::string comparison_csv(const ComparisonReport& report) {
  std::string out = "method,train_rmse,test_rmse,k_2d,k_3d,n_train,n_test\n";
  for (const MethodScore& s : report.rows) {
    out += to_string(s.method) + "," + format_double(s.train_rmse) + "," + format_double(s.test_rmse) + "," +
           std::to_string(report.k_2d) + "," + std::to_string(report.k_3d) + "," + std::to_string(report.n_train) +
           "," + std::to_string(report.n_test) + "\n";
  }
  return out;
}

std::string comparison_summary(const ComparisonReport& report, const ExperimentConfig& config) {
  std::ostringstream out;
  char line[160];
  out << "Average RMSE by mapping method\n\n";
  std::snprintf(line, sizeof line, "%-8s %14s %14s %10s\n", "method", "train", "test", "seconds");
  out << line;
  for (const MethodScore& s : report.rows) {
    std::snprintf(line, sizeof line, "%-8s %14.6g %14.6g %10.2f\n", to_string(s.method).c_str(), s.train_rmse,
                  s.test_rmse, s.seconds);
    out << line;
  }
  out << "\nk_2d = " << report.k_2d << ", k_3d = " << report.k_3d << ", train pairs = " << report.n_train
      << ", test pairs = " << report.n_test << "\n";
  for (const std::string& w : report.warnings) out << "warning: " << w << "\n";
  out << "\nconfig:\n"
      << format_config(config);
  return out.str();
}

}  // namespace invrender
