#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "invrender/linalg.hpp"
#include "invrender/render.hpp"
#include "invrender/shapes.hpp"

namespace invrender::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);

// Binary PGM (P5), maxval 255, byte = round(pixel * 255).
std::string encode_pgm(const Image2D& image);
Image2D decode_pgm(std::string_view bytes);
void write_pgm(const fs::path& path, const Image2D& image);
Image2D read_pgm(const fs::path& path);

// "VOXR <resolution>\n" then resolution³ bits, 8 per byte, LSB first in grid
// order, final byte zero padded.
std::string encode_voxr(const VoxelGrid& grid);
VoxelGrid decode_voxr(std::string_view bytes);
void write_voxr(const fs::path& path, const VoxelGrid& grid);
VoxelGrid read_voxr(const fs::path& path);

// ASCII PLY with double x, y, z (17 significant digits) and, when `errors` is
// given, a per-vertex double "error" property. The correspondence id travels in
// a comment line.
std::string encode_ply(const PointCloud& cloud, const std::vector<double>* errors = nullptr);
void write_ply(const fs::path& path, const PointCloud& cloud, const std::vector<double>* errors = nullptr);

struct PlyData {
  PointCloud cloud;
  std::vector<double> errors;  // empty unless the file carries an error property
};
PlyData decode_ply(std::string_view text);
PlyData read_ply(const fs::path& path);

// Container shared by the model and matrix files: a single-line JSON header
// followed by raw little-endian doubles.
struct Blob {
  nlohmann::json header;
  std::vector<double> values;
};
std::string encode_blob(const nlohmann::json& header, std::span<const double> values);
Blob decode_blob(std::string_view bytes);

// Dense matrix file: header {"format": "matrix", rows, cols}, row-major payload.
void write_matrix(const fs::path& path, const Matrix& m);
Matrix read_matrix(const fs::path& path);

}  // namespace invrender::io
