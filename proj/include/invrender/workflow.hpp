#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "invrender/pipeline.hpp"

// File-level stages behind the command-line tool. Each reads its inputs from
// disk and writes its artifacts into an output directory.
namespace invrender {

struct RunLog {
  std::string summary;                // for stdout
  std::vector<std::string> warnings;  // for stderr
};

// The dataset section always comes from the data directory's manifest.
ExperimentConfig bind_dataset(ExperimentConfig config, const fs::path& data);

std::string map_file_name(MapKind kind);  // mapping_<kind>.map

RunLog run_generate(const ExperimentConfig& config, const fs::path& out, std::size_t threads);
// image.ssm, shape.ssm, pretrain.txt
RunLog run_pretrain(const ExperimentConfig& config, const fs::path& data, const fs::path& out, std::size_t threads);
// mapping_<method>.map, plus loss_mlp.csv for the MLP
RunLog run_fit(const ExperimentConfig& config, const fs::path& data, const fs::path& model_dir, const fs::path& out,
               std::size_t threads);
// eval_<method>_<split>.csv/.txt, predictions_<method>_<split>.dmat,
// truth_<split>.dmat, and export/ with the first export_count predictions
// and their heat maps.
RunLog run_eval(const ExperimentConfig& config, const fs::path& data, const fs::path& model_dir,
                const std::string& split, const fs::path& out, std::size_t export_count, std::size_t threads);
// comparison.csv and comparison.txt. An empty data path generates the
// config's dataset into out/data first.
RunLog run_compare(const ExperimentConfig& config, const fs::path& data, const fs::path& out, std::size_t threads);

void run_render(const fs::path& shape, double yaw_deg, std::size_t width, std::size_t height, const fs::path& out);
// Voxel inputs become clouds of occupied cell centers.
RunLog run_heatmap(const fs::path& prediction, const fs::path& truth, HeatMode mode, const fs::path& out);

// "key: value" lines describing a file or a dataset directory.
std::string inspect(const fs::path& path);

}  // namespace invrender
