#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invrender/mapping.hpp"
#include "invrender/render.hpp"
#include "invrender/shapes.hpp"
#include "invrender/subspace.hpp"

namespace invrender {

namespace fs = std::filesystem;

enum class Modality { Voxel, Cloud };
// How many views of each shape enter a split: every pose, or one pose picked
// from the shape's seed.
enum class ViewMode { One, All };

std::string_view to_string(Modality m);
std::string_view to_string(ViewMode m);

struct DatasetManifest {
  Modality modality = Modality::Voxel;
  std::vector<ShapeKind> shape_kinds = {ShapeKind::Box, ShapeKind::Ellipsoid, ShapeKind::Cylinder,
                                        ShapeKind::Torus, ShapeKind::Composite};
  std::size_t unlabeled_2d = 300;
  std::size_t unlabeled_3d = 300;
  std::size_t paired_train = 200;
  std::size_t paired_test = 50;
  std::size_t resolution = 16;
  std::size_t point_count = 600;
  std::size_t image_width = 32;
  std::size_t image_height = 32;
  std::size_t view_count = 8;
  std::vector<double> yaws;  // explicit pose list; overrides view_count when set
  ViewMode unlabeled_views = ViewMode::All;
  ViewMode paired_views = ViewMode::One;
  std::uint64_t seed = 42;

  std::vector<Pose> poses() const;
  std::size_t image_dim() const { return image_width * image_height; }
  std::size_t shape_dim() const;
  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

struct ExperimentConfig {
  DatasetManifest dataset;
  std::size_t k_2d = 60;
  std::size_t k_3d = 400;
  MapKind method = MapKind::LowDim;
  std::vector<std::size_t> mlp_hidden = {100};
  std::vector<LearningPhase> phases = {{1e-3, 1000}, {1e-5, 1000}};
  std::size_t batch_size = 40;
  // Falls back to the dataset seed when unset.
  std::optional<std::uint64_t> train_seed;

  // Shuffling and initialization seed for the MLP.
  TrainSchedule schedule() const;
  void validate() const;
};

// INI text with [dataset], [model] and [train] sections. Missing keys keep
// their defaults; unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const fs::path& path);
// Canonical text; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& config);
std::string format_manifest(const DatasetManifest& manifest);

// Split files, one row per sample.
inline constexpr const char* kSplitUnlabeled2d = "unlabeled_2d";
inline constexpr const char* kSplitUnlabeled3d = "unlabeled_3d";
inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitTest = "test";

struct SplitRow {
  std::size_t shape_id = 0;
  ShapeKind kind = ShapeKind::Box;
  std::size_t view = 0;  // pose index; meaningless without an image
  double yaw_deg = 0.0;
  std::string image;     // relative to the dataset root, empty if none
  std::string shape;     // likewise
  bool operator==(const SplitRow&) const = default;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// handled exactly once; callers write into preassigned slots.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Writes manifest.cfg, splits/*.csv, images/*.pgm and shapes/*.
void generate_dataset(const DatasetManifest& manifest, const fs::path& out, std::size_t threads = 1);
DatasetManifest load_manifest(const fs::path& data);
std::vector<SplitRow> read_split(const fs::path& data, std::string_view split);
// Columns are samples.
Matrix load_images(const fs::path& data, const std::vector<SplitRow>& rows, std::size_t threads = 1);
Matrix load_shapes(const fs::path& data, const DatasetManifest& manifest, const std::vector<SplitRow>& rows,
                   std::size_t threads = 1);

struct Subspaces {
  SubspaceModel image;
  SubspaceModel shape;
  std::vector<std::string> warnings;  // shrunk k values
};

// Reads only the unlabeled splits.
Subspaces pretrain(const fs::path& data, std::size_t k_2d, std::size_t k_3d, std::size_t threads = 1);
Subspaces fit_subspaces(const Matrix& images, const Matrix& shapes, std::size_t k_2d, std::size_t k_3d);

struct MappingModel {
  MapKind kind = MapKind::LowDim;
  LinearMap linear;
  DirectMap direct;
  MlpMap mlp;
  std::vector<double> loss_history;
};

// x: D x n images, z: p x n shapes (raw, uncentered).
MappingModel fit_mapping(const ExperimentConfig& config, const Subspaces& models, const Matrix& x, const Matrix& z);
// Raw real-valued predictions, p x n.
Matrix reconstruct_all(const Subspaces& models, const MappingModel& map, const Matrix& x);
Vector reconstruct(const Subspaces& models, const MappingModel& map, const Image2D& image);

StoredMap to_stored(const MappingModel& map);
MappingModel from_stored(const StoredMap& stored);

struct EvaluationReport {
  double average_rmse = 0.0;
  std::vector<double> per_sample_rmse;
};

// Per sample √(‖x̂ − x‖² / dim), averaged over the samples.
EvaluationReport evaluate_rmse(const Matrix& predictions, const Matrix& truths);

enum class HeatMode { Corresponded, Nearest };
std::string_view to_string(HeatMode m);
HeatMode parse_heat_mode(std::string_view name);

struct HeatMap {
  HeatMode mode = HeatMode::Corresponded;
  std::vector<double> errors;  // one per ground-truth point
};

// Nearest mode measures from each ground-truth point to the closest
// predicted point.
HeatMap heatmap(const PointCloud& prediction, const PointCloud& truth, HeatMode mode);

struct MethodScore {
  MapKind method = MapKind::LowDim;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double seconds = 0.0;
};

struct ComparisonReport {
  std::vector<MethodScore> rows;
  std::size_t k_2d = 0;
  std::size_t k_3d = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::string> warnings;
};

ComparisonReport compare_methods(const ExperimentConfig& config, const fs::path& data, std::size_t threads = 1);
// Deterministic content only; timings go to the text summary.
std::string comparison_csv(const ComparisonReport& report);
std::string comparison_summary(const ComparisonReport& report, const ExperimentConfig& config);

// "%.17g"
std::string format_double(double v);

}  // namespace invrender
