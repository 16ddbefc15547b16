#pragma once

#include <cstddef>
#include <vector>

#include "invrender/linalg.hpp"
#include "invrender/shapes.hpp"

namespace invrender {

// Grayscale raster, row-major, row 0 at the top. Values in [0, 1].
struct Image2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  Image2D() = default;
  Image2D(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0.0) {}

  double& at(std::size_t col, std::size_t row) { return pixels[row * width + col]; }
  double at(std::size_t col, std::size_t row) const { return pixels[row * width + col]; }

  bool operator==(const Image2D&) const = default;
};

// Rotation about the vertical axis through the cube center. Constructed yaws
// are wrapped into [0, 360).
class Pose {
 public:
  Pose() = default;
  explicit Pose(double yaw_deg);

  double yaw_deg() const noexcept { return yaw_deg_; }

 private:
  double yaw_deg_ = 0.0;
};

// Exact for point clouds up to rounding; yaw 0 returns the input unchanged.
PointCloud rotate_z(const PointCloud& cloud, const Pose& pose);
// Nearest-neighbor inverse mapping of target cell centers; content that would
// come from outside the cube is left empty.
VoxelGrid rotate_z(const VoxelGrid& grid, const Pose& pose);

// Orthographic view along +y after rotate_z. Pixel columns follow x, rows
// follow z from the top. Pixel = 1 - depth of the first surface hit, where
// depth is the y coordinate in the unit cube; 0 where nothing projects.
Image2D render_depth(const VoxelGrid& grid, const Pose& pose, std::size_t width, std::size_t height);
Image2D render_depth(const PointCloud& cloud, const Pose& pose, std::size_t width, std::size_t height);

// yaw_i = 180 * i / view_count, i in [0, view_count).
std::vector<Pose> view_poses(std::size_t view_count);

template <typename Shape>
std::vector<Image2D> render_views(const Shape& shape, const std::vector<Pose>& poses, std::size_t width,
                                  std::size_t height) {
  std::vector<Image2D> out;
  out.reserve(poses.size());
  for (const auto& pose : poses) out.push_back(render_depth(shape, pose, width, height));
  return out;
}

template <typename Shape>
std::vector<Image2D> render_views(const Shape& shape, std::size_t view_count, std::size_t width,
                                  std::size_t height) {
  return render_views(shape, view_poses(view_count), width, height);
}

Image2D mirrored_horizontally(const Image2D& image);

Vector vectorize(const Image2D& image);
Image2D image_from_vector(std::span<const double> values, std::size_t width, std::size_t height);

}  // namespace invrender
