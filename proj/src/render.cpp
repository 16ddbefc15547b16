#include "invrender/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "invrender/error.hpp"

namespace invrender {

namespace {

struct Rotation {
  double cos = 1.0;
  double sin = 0.0;
};

// Quarter turns use exact coefficients so 90/180/270 rotations of lattices are
// exact permutations.
Rotation rotation_for(double yaw_deg) {
  if (std::fmod(yaw_deg, 90.0) == 0.0) {
    switch (static_cast<int>(yaw_deg / 90.0)) {
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      case 3: return {0.0, -1.0};
      default: return {1.0, 0.0};
    }
  }
  const double rad = yaw_deg * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

void require_size(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) fail_invalid("image size must be positive");
}

}  // namespace

Pose::Pose(double yaw_deg) {
  if (!std::isfinite(yaw_deg)) fail_invalid("yaw must be finite");
  double wrapped = std::fmod(yaw_deg, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  if (wrapped >= 360.0) wrapped = 0.0;
  yaw_deg_ = wrapped;
}

PointCloud rotate_z(const PointCloud& cloud, const Pose& pose) {
  if (pose.yaw_deg() == 0.0) return cloud;
  const Rotation r = rotation_for(pose.yaw_deg());
  PointCloud out = cloud;
  for (auto& p : out.points) {
    const double dx = p.x - 0.5;
    const double dy = p.y - 0.5;
    p.x = 0.5 + (r.cos * dx - r.sin * dy);
    p.y = 0.5 + (r.sin * dx + r.cos * dy);
  }
  return out;
}

VoxelGrid rotate_z(const VoxelGrid& grid, const Pose& pose) {
  if (pose.yaw_deg() == 0.0) return grid;
  const Rotation r = rotation_for(pose.yaw_deg());
  const std::size_t n = grid.resolution();
  const double res = static_cast<double>(n);
  VoxelGrid out(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = (static_cast<double>(x) + 0.5) / res - 0.5;
      const double dy = (static_cast<double>(y) + 0.5) / res - 0.5;
      // Inverse rotation of the target cell center.
      const double sx = (0.5 + (r.cos * dx + r.sin * dy)) * res;
      const double sy = (0.5 + (-r.sin * dx + r.cos * dy)) * res;
      if (sx < 0.0 || sy < 0.0 || sx >= res || sy >= res) continue;
      const auto ix = static_cast<std::size_t>(sx);
      const auto iy = static_cast<std::size_t>(sy);
      for (std::size_t z = 0; z < n; ++z) {
        if (grid.occupied(ix, iy, z)) out.set(x, y, z);
      }
    }
  }
  return out;
}

Image2D render_depth(const VoxelGrid& grid, const Pose& pose, std::size_t width, std::size_t height) {
  require_size(width, height);
  Image2D image(width, height);
  const std::size_t n = grid.resolution();
  if (n == 0) return image;
  const VoxelGrid rotated = rotate_z(grid, pose);
  const double res = static_cast<double>(n);
  for (std::size_t row = 0; row < height; ++row) {
    const double z = 1.0 - (static_cast<double>(row) + 0.5) / static_cast<double>(height);
    const auto iz = std::min(static_cast<std::size_t>(z * res), n - 1);
    for (std::size_t col = 0; col < width; ++col) {
      const double x = (static_cast<double>(col) + 0.5) / static_cast<double>(width);
      const auto ix = std::min(static_cast<std::size_t>(x * res), n - 1);
      for (std::size_t iy = 0; iy < n; ++iy) {
        if (rotated.occupied(ix, iy, iz)) {
          image.at(col, row) = 1.0 - (static_cast<double>(iy) + 0.5) / res;
          break;
        }
      }
    }
  }
  return image;
}

Image2D render_depth(const PointCloud& cloud, const Pose& pose, std::size_t width, std::size_t height) {
  require_size(width, height);
  Image2D image(width, height);
  const PointCloud rotated = rotate_z(cloud, pose);
  const auto pixel = [](double t, std::size_t count) {
    const double scaled = std::floor(t * static_cast<double>(count));
    if (scaled <= 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(scaled), count - 1);
  };
  for (const auto& p : rotated.points) {
    const std::size_t col = pixel(p.x, width);
    const std::size_t row = pixel(1.0 - p.z, height);
    const double value = std::clamp(1.0 - p.y, 0.0, 1.0);
    double& px = image.at(col, row);
    px = std::max(px, value);
  }
  return image;
}

std::vector<Pose> view_poses(std::size_t view_count) {
  if (view_count == 0) fail_invalid("view_count must be at least 1");
  std::vector<Pose> poses;
  poses.reserve(view_count);
  for (std::size_t i = 0; i < view_count; ++i) {
    poses.emplace_back(180.0 * static_cast<double>(i) / static_cast<double>(view_count));
  }
  return poses;
}

Image2D mirrored_horizontally(const Image2D& image) {
  Image2D out(image.width, image.height);
  for (std::size_t row = 0; row < image.height; ++row)
    for (std::size_t col = 0; col < image.width; ++col)
      out.at(image.width - 1 - col, row) = image.at(col, row);
  return out;
}

Vector vectorize(const Image2D& image) { return image.pixels; }

Image2D image_from_vector(std::span<const double> values, std::size_t width, std::size_t height) {
  if (values.size() != width * height) {
    fail_invalid("image vector length " + std::to_string(values.size()) + " does not match " +
                 std::to_string(width) + "x" + std::to_string(height));
  }
  Image2D image(width, height);
  std::copy(values.begin(), values.end(), image.pixels.begin());
  return image;
}

}  // namespace invrender
