#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "invrender/linalg.hpp"

namespace invrender {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Point3&) const = default;
};

double distance(const Point3& a, const Point3& b);

// Parameter ranges, all in unit-cube coordinates. Every solid must fit inside
// the vertical cylinder of radius kMaxRadialExtent about (0.5, 0.5) and the
// slab z in [kMargin, 1 - kMargin], so any rotation about z stays in the cube
// with a kMargin gap.
inline constexpr double kMargin = 0.05;
inline constexpr double kMaxRadialExtent = 0.5 - kMargin;
inline constexpr double kMinSize = 0.02;

// Axis-aligned box; half extents in [kMinSize, 0.45].
struct BoxParams {
  Point3 center;
  Point3 half_extents;
};

// Axis-aligned ellipsoid; radii in [kMinSize, 0.45].
struct EllipsoidParams {
  Point3 center;
  Point3 radii;
};

// Cylinder with its axis along z.
struct CylinderParams {
  Point3 center;
  double radius = 0.0;
  double half_height = 0.0;
};

// Torus around the z axis; minor_radius < major_radius.
struct TorusParams {
  Point3 center;
  double major_radius = 0.0;
  double minor_radius = 0.0;
};

using PrimitiveParams = std::variant<BoxParams, EllipsoidParams, CylinderParams, TorusParams>;

// Union of two primitives.
struct CompositeParams {
  std::array<PrimitiveParams, 2> parts;
};

enum class ShapeKind { Box, Ellipsoid, Cylinder, Torus, Composite };

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

struct ShapeSpec {
  std::variant<BoxParams, EllipsoidParams, CylinderParams, TorusParams, CompositeParams> params;
  std::uint64_t seed = 0;

  ShapeKind kind() const;
};

// Throws InvalidInput when any parameter leaves its documented range.
void validate(const ShapeSpec& spec);

// Draws a valid spec of the given kind from `seed`. Bit-identical for a fixed
// (kind, seed) on every platform.
ShapeSpec random_shape_spec(ShapeKind kind, std::uint64_t seed);

// Per-sample seed for dataset element `index` (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Binary occupancy on a cubic lattice, x fastest, then y, then z.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(std::size_t resolution);
  VoxelGrid(std::size_t resolution, std::vector<std::uint8_t> occupancy);

  std::size_t resolution() const noexcept { return resolution_; }
  std::size_t cell_count() const noexcept { return occupancy_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + resolution_ * (y + resolution_ * z);
  }
  bool occupied(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return occupancy_[index(x, y, z)] != 0;
  }
  bool occupied(std::size_t cell) const noexcept { return occupancy_[cell] != 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool on = true) noexcept {
    occupancy_[index(x, y, z)] = on ? 1 : 0;
  }
  void set(std::size_t cell, bool on = true) noexcept { occupancy_[cell] = on ? 1 : 0; }

  std::size_t occupied_count() const noexcept;
  std::span<const std::uint8_t> occupancy() const noexcept { return occupancy_; }

  bool operator==(const VoxelGrid&) const = default;

 private:
  std::size_t resolution_ = 0;
  std::vector<std::uint8_t> occupancy_;
};

// Points are ordered; every cloud with the same correspondence_id has the same
// count and point i denotes the same surface location.
struct PointCloud {
  std::vector<Point3> points;
  std::string correspondence_id;

  bool operator==(const PointCloud&) const = default;
};

bool is_normalized(const PointCloud& cloud);

// Cell is occupied iff its center lies inside the solid. resolution in [8, 64].
VoxelGrid generate_voxel_shape(const ShapeSpec& spec, std::size_t resolution);

// Surface parameter of a generated point: patch (face / cap / side) plus the
// lattice coordinate inside it.
struct SurfaceSample {
  std::uint32_t patch = 0;
  double u = 0.0;
  double v = 0.0;

  bool operator==(const SurfaceSample&) const = default;
};

// Samples the surface on a fixed parametric lattice, so point i has the same
// (patch, u, v) for every spec of a kind. Composite shapes are rejected.
// When `record` is non-null it receives the parameter of every point.
PointCloud generate_point_shape(const ShapeSpec& spec, std::size_t point_count,
                                std::vector<SurfaceSample>* record = nullptr);

std::string correspondence_id(ShapeKind kind, std::size_t point_count);

// Half-open cells, except the last cell on each axis also takes coordinate 1.
VoxelGrid voxelize(const PointCloud& cloud, std::size_t resolution);

// One point per occupied cell center, in grid order.
PointCloud cloud_from_voxels(const VoxelGrid& grid);

// 0/1 per cell in grid order.
Vector vectorize(const VoxelGrid& grid);
// (x1, y1, z1, x2, ...)
Vector vectorize(const PointCloud& cloud);

// Occupied iff value >= threshold.
VoxelGrid voxels_from_vector(std::span<const double> values, std::size_t resolution,
                             double threshold = 0.5);
PointCloud cloud_from_vector(std::span<const double> values, std::string correspondence_id = {});

}  // namespace invrender
