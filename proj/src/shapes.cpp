#include "invrender/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "invrender/error.hpp"

namespace invrender {

namespace {

constexpr double kSlack = 1e-12;
constexpr double kMaxSize = kMaxRadialExtent;
constexpr double kInvGolden = 0.6180339887498949;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double radial_offset(const Point3& c) { return std::hypot(c.x - 0.5, c.y - 0.5); }

void require(bool ok, const std::string& what) {
  if (!ok) fail_invalid("invalid shape spec: " + what);
}

void require_size(double v, const char* name) {
  require(std::isfinite(v) && v >= kMinSize - kSlack && v <= kMaxSize + kSlack,
          std::string(name) + " outside [0.02, 0.45]");
}

void require_finite(const Point3& p, const char* name) {
  require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z),
          std::string(name) + " is not finite");
}

void require_z_span(double cz, double half) {
  require(cz - half >= kMargin - kSlack && cz + half <= 1.0 - kMargin + kSlack,
          "z extent leaves [0.05, 0.95]");
}

void require_radial(double extent) {
  require(extent <= kMaxRadialExtent + kSlack, "horizontal extent leaves the 0.45 radius about the z axis");
}

void validate_primitive(const BoxParams& p) {
  require_finite(p.center, "box center");
  require_size(p.half_extents.x, "box half extent x");
  require_size(p.half_extents.y, "box half extent y");
  require_size(p.half_extents.z, "box half extent z");
  require_z_span(p.center.z, p.half_extents.z);
  require_radial(std::hypot(std::abs(p.center.x - 0.5) + p.half_extents.x,
                            std::abs(p.center.y - 0.5) + p.half_extents.y));
}

void validate_primitive(const EllipsoidParams& p) {
  require_finite(p.center, "ellipsoid center");
  require_size(p.radii.x, "ellipsoid radius x");
  require_size(p.radii.y, "ellipsoid radius y");
  require_size(p.radii.z, "ellipsoid radius z");
  require_z_span(p.center.z, p.radii.z);
  require_radial(radial_offset(p.center) + std::max(p.radii.x, p.radii.y));
}

void validate_primitive(const CylinderParams& p) {
  require_finite(p.center, "cylinder center");
  require_size(p.radius, "cylinder radius");
  require_size(p.half_height, "cylinder half height");
  require_z_span(p.center.z, p.half_height);
  require_radial(radial_offset(p.center) + p.radius);
}

void validate_primitive(const TorusParams& p) {
  require_finite(p.center, "torus center");
  require_size(p.major_radius, "torus major radius");
  require_size(p.minor_radius, "torus minor radius");
  require(p.minor_radius < p.major_radius, "torus minor radius must be below the major radius");
  require_z_span(p.center.z, p.minor_radius);
  require_radial(radial_offset(p.center) + p.major_radius + p.minor_radius);
}

void validate_primitive(const CompositeParams& p) {
  for (const auto& part : p.parts) std::visit([](const auto& q) { validate_primitive(q); }, part);
}

bool inside(const BoxParams& p, const Point3& q) {
  return std::abs(q.x - p.center.x) <= p.half_extents.x &&
         std::abs(q.y - p.center.y) <= p.half_extents.y &&
         std::abs(q.z - p.center.z) <= p.half_extents.z;
}

bool inside(const EllipsoidParams& p, const Point3& q) {
  const double dx = (q.x - p.center.x) / p.radii.x;
  const double dy = (q.y - p.center.y) / p.radii.y;
  const double dz = (q.z - p.center.z) / p.radii.z;
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

bool inside(const CylinderParams& p, const Point3& q) {
  const double dx = q.x - p.center.x;
  const double dy = q.y - p.center.y;
  return dx * dx + dy * dy <= p.radius * p.radius && std::abs(q.z - p.center.z) <= p.half_height;
}

bool inside(const TorusParams& p, const Point3& q) {
  const double dx = q.x - p.center.x;
  const double dy = q.y - p.center.y;
  const double dz = q.z - p.center.z;
  const double ring = std::sqrt(dx * dx + dy * dy) - p.major_radius;
  return ring * ring + dz * dz <= p.minor_radius * p.minor_radius;
}

bool inside(const CompositeParams& p, const Point3& q) {
  return std::any_of(p.parts.begin(), p.parts.end(), [&](const PrimitiveParams& part) {
    return std::visit([&](const auto& s) { return inside(s, q); }, part);
  });
}

// Draws in [lo, hi).
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double operator()(double lo, double hi) { return lo + (hi - lo) * unit_double(rng_()); }
  std::uint64_t bits() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

// Horizontal center offset keeping a solid of horizontal reach `reach` inside
// the allowed radius.
void place_horizontally(Draw& draw, Point3& center, double reach_x, double reach_y) {
  const double room = (kMaxRadialExtent - std::hypot(reach_x, reach_y)) / std::numbers::sqrt2;
  center.x = 0.5 + draw(-room, room);
  center.y = 0.5 + draw(-room, room);
}

void place_vertically(Draw& draw, Point3& center, double half) {
  center.z = draw(kMargin + half, 1.0 - kMargin - half);
}

BoxParams random_box(Draw& draw) {
  BoxParams p;
  p.half_extents = {draw(0.06, 0.22), draw(0.06, 0.22), draw(0.06, 0.22)};
  place_horizontally(draw, p.center, p.half_extents.x, p.half_extents.y);
  place_vertically(draw, p.center, p.half_extents.z);
  return p;
}

EllipsoidParams random_ellipsoid(Draw& draw) {
  EllipsoidParams p;
  p.radii = {draw(0.08, 0.25), draw(0.08, 0.25), draw(0.08, 0.25)};
  const double reach = std::max(p.radii.x, p.radii.y);
  place_horizontally(draw, p.center, reach / std::numbers::sqrt2, reach / std::numbers::sqrt2);
  place_vertically(draw, p.center, p.radii.z);
  return p;
}

CylinderParams random_cylinder(Draw& draw) {
  CylinderParams p;
  p.radius = draw(0.08, 0.25);
  p.half_height = draw(0.08, 0.3);
  place_horizontally(draw, p.center, p.radius / std::numbers::sqrt2, p.radius / std::numbers::sqrt2);
  place_vertically(draw, p.center, p.half_height);
  return p;
}

TorusParams random_torus(Draw& draw) {
  TorusParams p;
  p.major_radius = draw(0.12, 0.25);
  p.minor_radius = draw(0.04, std::min(0.1, p.major_radius - 0.02));
  const double reach = (p.major_radius + p.minor_radius) / std::numbers::sqrt2;
  place_horizontally(draw, p.center, reach, reach);
  place_vertically(draw, p.center, p.minor_radius);
  return p;
}

PrimitiveParams random_primitive(ShapeKind kind, Draw& draw) {
  switch (kind) {
    case ShapeKind::Box: return random_box(draw);
    case ShapeKind::Ellipsoid: return random_ellipsoid(draw);
    case ShapeKind::Cylinder: return random_cylinder(draw);
    case ShapeKind::Torus: return random_torus(draw);
    case ShapeKind::Composite: break;
  }
  fail_invalid("composite shapes cannot be nested");
}

// Row-by-row lattice with exactly `count` cells filled.
SurfaceSample grid_lattice(std::uint32_t patch, std::size_t j, std::size_t count) {
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t rows = (count + cols - 1) / cols;
  return {patch, (static_cast<double>(j % cols) + 0.5) / static_cast<double>(cols),
          (static_cast<double>(j / cols) + 0.5) / static_cast<double>(rows)};
}

// Golden-angle lattice: v spaced evenly, u rotating by the golden ratio.
SurfaceSample golden_lattice(std::uint32_t patch, std::size_t j, std::size_t count) {
  const double u = std::fmod(static_cast<double>(j) * kInvGolden, 1.0);
  return {patch, u, (static_cast<double>(j) + 0.5) / static_cast<double>(count)};
}

// Splits `total` over `parts` as evenly as possible, earlier parts first.
std::size_t share(std::size_t total, std::size_t parts, std::size_t index) {
  return total / parts + (index < total % parts ? 1 : 0);
}

std::vector<SurfaceSample> lattice_for(ShapeKind kind, std::size_t n) {
  std::vector<SurfaceSample> out;
  out.reserve(n);
  switch (kind) {
    case ShapeKind::Box:
      for (std::uint32_t face = 0; face < 6; ++face) {
        const std::size_t count = share(n, 6, face);
        for (std::size_t j = 0; j < count; ++j) out.push_back(grid_lattice(face, j, count));
      }
      break;
    case ShapeKind::Ellipsoid:
    case ShapeKind::Torus:
      for (std::size_t j = 0; j < n; ++j) out.push_back(golden_lattice(0, j, n));
      break;
    case ShapeKind::Cylinder: {
      const std::size_t cap = n / 4;
      const std::size_t side = n - 2 * cap;
      for (std::size_t j = 0; j < side; ++j) out.push_back(grid_lattice(0, j, side));
      for (std::uint32_t c = 1; c <= 2; ++c)
        for (std::size_t j = 0; j < cap; ++j) out.push_back(golden_lattice(c, j, cap));
      break;
    }
    case ShapeKind::Composite:
      fail_invalid("invalid shape spec: composite shapes have no parametric surface");
  }
  return out;
}

double lerp_span(double center, double half, double t) { return center - half + 2.0 * half * t; }

Point3 surface_point(const BoxParams& p, const SurfaceSample& s) {
  const Point3& c = p.center;
  const Point3& h = p.half_extents;
  switch (s.patch) {
    case 0: return {c.x - h.x, lerp_span(c.y, h.y, s.u), lerp_span(c.z, h.z, s.v)};
    case 1: return {c.x + h.x, lerp_span(c.y, h.y, s.u), lerp_span(c.z, h.z, s.v)};
    case 2: return {lerp_span(c.x, h.x, s.u), c.y - h.y, lerp_span(c.z, h.z, s.v)};
    case 3: return {lerp_span(c.x, h.x, s.u), c.y + h.y, lerp_span(c.z, h.z, s.v)};
    case 4: return {lerp_span(c.x, h.x, s.u), lerp_span(c.y, h.y, s.v), c.z - h.z};
    default: return {lerp_span(c.x, h.x, s.u), lerp_span(c.y, h.y, s.v), c.z + h.z};
  }
}

Point3 surface_point(const EllipsoidParams& p, const SurfaceSample& s) {
  const double z = 1.0 - 2.0 * s.v;
  const double ring = std::sqrt(1.0 - z * z);
  const double theta = kTwoPi * s.u;
  return {p.center.x + p.radii.x * ring * std::cos(theta),
          p.center.y + p.radii.y * ring * std::sin(theta), p.center.z + p.radii.z * z};
}

Point3 surface_point(const CylinderParams& p, const SurfaceSample& s) {
  const double theta = kTwoPi * s.u;
  if (s.patch == 0) {
    return {p.center.x + p.radius * std::cos(theta), p.center.y + p.radius * std::sin(theta),
            lerp_span(p.center.z, p.half_height, s.v)};
  }
  const double r = p.radius * std::sqrt(s.v);
  const double z = s.patch == 1 ? p.center.z - p.half_height : p.center.z + p.half_height;
  return {p.center.x + r * std::cos(theta), p.center.y + r * std::sin(theta), z};
}

Point3 surface_point(const TorusParams& p, const SurfaceSample& s) {
  const double theta = kTwoPi * s.v;
  const double phi = kTwoPi * s.u;
  const double ring = p.major_radius + p.minor_radius * std::cos(phi);
  return {p.center.x + ring * std::cos(theta), p.center.y + ring * std::sin(theta),
          p.center.z + p.minor_radius * std::sin(phi)};
}

Point3 surface_point(const CompositeParams&, const SurfaceSample&) {
  fail_invalid("invalid shape spec: composite shapes have no parametric surface");
}

}  // namespace

double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Ellipsoid: return "ellipsoid";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Composite: return "composite";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (ShapeKind k : {ShapeKind::Box, ShapeKind::Ellipsoid, ShapeKind::Cylinder, ShapeKind::Torus,
                      ShapeKind::Composite}) {
    if (to_string(k) == name) return k;
  }
  fail_invalid("unknown shape kind '" + std::string(name) + "'");
}

ShapeKind ShapeSpec::kind() const { return static_cast<ShapeKind>(params.index()); }

void validate(const ShapeSpec& spec) {
  std::visit([](const auto& p) { validate_primitive(p); }, spec.params);
}

ShapeSpec random_shape_spec(ShapeKind kind, std::uint64_t seed) {
  Draw draw(seed);
  ShapeSpec spec;
  spec.seed = seed;
  if (kind == ShapeKind::Composite) {
    CompositeParams c;
    for (auto& part : c.parts) {
      const auto pick = static_cast<ShapeKind>(draw.bits() % 4);
      part = random_primitive(pick, draw);
    }
    spec.params = c;
  } else {
    std::visit([&](auto&& p) { spec.params = p; }, random_primitive(kind, draw));
  }
  validate(spec);
  return spec;
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

VoxelGrid::VoxelGrid(std::size_t resolution)
    : resolution_(resolution), occupancy_(resolution * resolution * resolution, 0) {}

VoxelGrid::VoxelGrid(std::size_t resolution, std::vector<std::uint8_t> occupancy)
    : resolution_(resolution), occupancy_(std::move(occupancy)) {
  if (occupancy_.size() != resolution * resolution * resolution) {
    fail_invalid("voxel occupancy length " + std::to_string(occupancy_.size()) +
                 " does not match resolution " + std::to_string(resolution));
  }
  for (auto& c : occupancy_) c = c ? 1 : 0;
}

std::size_t VoxelGrid::occupied_count() const noexcept {
  return static_cast<std::size_t>(std::count(occupancy_.begin(), occupancy_.end(), std::uint8_t{1}));
}

bool is_normalized(const PointCloud& cloud) {
  return std::all_of(cloud.points.begin(), cloud.points.end(), [](const Point3& p) {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0 && p.z >= 0.0 && p.z <= 1.0;
  });
}

VoxelGrid generate_voxel_shape(const ShapeSpec& spec, std::size_t resolution) {
  if (resolution < 8 || resolution > 64) {
    fail_invalid("voxel resolution " + std::to_string(resolution) + " outside [8, 64]");
  }
  validate(spec);
  VoxelGrid grid(resolution);
  const double res = static_cast<double>(resolution);
  for (std::size_t z = 0; z < resolution; ++z) {
    for (std::size_t y = 0; y < resolution; ++y) {
      for (std::size_t x = 0; x < resolution; ++x) {
        const Point3 center{(static_cast<double>(x) + 0.5) / res, (static_cast<double>(y) + 0.5) / res,
                            (static_cast<double>(z) + 0.5) / res};
        if (std::visit([&](const auto& p) { return inside(p, center); }, spec.params)) grid.set(x, y, z);
      }
    }
  }
  return grid;
}

std::string correspondence_id(ShapeKind kind, std::size_t point_count) {
  return std::string(to_string(kind)) + "-" + std::to_string(point_count);
}

PointCloud generate_point_shape(const ShapeSpec& spec, std::size_t point_count,
                                std::vector<SurfaceSample>* record) {
  if (point_count < 4) fail_invalid("point_count must be at least 4");
  validate(spec);
  const auto lattice = lattice_for(spec.kind(), point_count);
  PointCloud cloud;
  cloud.correspondence_id = correspondence_id(spec.kind(), point_count);
  cloud.points.reserve(lattice.size());
  for (const auto& s : lattice) {
    cloud.points.push_back(std::visit([&](const auto& p) { return surface_point(p, s); }, spec.params));
  }
  if (record) *record = lattice;
  return cloud;
}

namespace {

std::size_t cell_of(double coord, std::size_t resolution) {
  const auto cell = static_cast<std::size_t>(std::floor(coord * static_cast<double>(resolution)));
  return std::min(cell, resolution - 1);
}

}  // namespace

VoxelGrid voxelize(const PointCloud& cloud, std::size_t resolution) {
  if (resolution == 0) fail_invalid("voxel resolution must be positive");
  if (!is_normalized(cloud)) fail_invalid("voxelize: cloud coordinates must lie in [0, 1]");
  VoxelGrid grid(resolution);
  for (const auto& p : cloud.points) {
    grid.set(cell_of(p.x, resolution), cell_of(p.y, resolution), cell_of(p.z, resolution));
  }
  return grid;
}

PointCloud cloud_from_voxels(const VoxelGrid& grid) {
  PointCloud cloud;
  cloud.correspondence_id = "voxel-centers-" + std::to_string(grid.resolution());
  const std::size_t r = grid.resolution();
  const double res = static_cast<double>(r);
  for (std::size_t z = 0; z < r; ++z)
    for (std::size_t y = 0; y < r; ++y)
      for (std::size_t x = 0; x < r; ++x)
        if (grid.occupied(x, y, z))
          cloud.points.push_back({(static_cast<double>(x) + 0.5) / res, (static_cast<double>(y) + 0.5) / res,
                                  (static_cast<double>(z) + 0.5) / res});
  return cloud;
}

Vector vectorize(const VoxelGrid& grid) {
  Vector out(grid.cell_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grid.occupied(i) ? 1.0 : 0.0;
  return out;
}

Vector vectorize(const PointCloud& cloud) {
  Vector out;
  out.reserve(cloud.points.size() * 3);
  for (const auto& p : cloud.points) {
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.z);
  }
  return out;
}

VoxelGrid voxels_from_vector(std::span<const double> values, std::size_t resolution, double threshold) {
  VoxelGrid grid(resolution);
  if (values.size() != grid.cell_count()) {
    fail_invalid("voxel vector length " + std::to_string(values.size()) + " does not match resolution " +
                 std::to_string(resolution));
  }
  for (std::size_t i = 0; i < values.size(); ++i) grid.set(i, values[i] >= threshold);
  return grid;
}

PointCloud cloud_from_vector(std::span<const double> values, std::string id) {
  if (values.size() % 3 != 0) {
    fail_invalid("point vector length " + std::to_string(values.size()) + " is not a multiple of 3");
  }
  PointCloud cloud;
  cloud.correspondence_id = std::move(id);
  cloud.points.reserve(values.size() / 3);
  for (std::size_t i = 0; i < values.size(); i += 3) cloud.points.push_back({values[i], values[i + 1], values[i + 2]});
  return cloud;
}

}  // namespace invrender
