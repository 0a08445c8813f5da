#include "b2p/voxel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "b2p/error.hpp"
#include "b2p/rng.hpp"

namespace b2p::voxel {
namespace {

void check_depth(int n) {
  if (n < 2 || n > 16) throw ConfigError("synth: bit depth must be in [2, 16]");
}

struct Sphere {
  Vec3 center;
  double radius;
  double phase;
  int checker;
};

void add_sphere(const Sphere& s, int bit_depth, std::vector<Coord>& pts, std::vector<Vec3>& cols) {
  const int32_t side = int32_t{1} << bit_depth;
  const Vec3 dark{0.85, 0.15, 0.10};
  const Vec3 light{0.95, 0.95, 0.85};
  const int lo_x = std::max(0, static_cast<int>(std::floor(s.center[0] - s.radius - 1)));
  const int hi_x = std::min(side - 1, static_cast<int>(std::ceil(s.center[0] + s.radius + 1)));
  const int lo_y = std::max(0, static_cast<int>(std::floor(s.center[1] - s.radius - 1)));
  const int hi_y = std::min(side - 1, static_cast<int>(std::ceil(s.center[1] + s.radius + 1)));
  const int lo_z = std::max(0, static_cast<int>(std::floor(s.center[2] - s.radius - 1)));
  const int hi_z = std::min(side - 1, static_cast<int>(std::ceil(s.center[2] + s.radius + 1)));
  for (int z = lo_z; z <= hi_z; ++z) {
    for (int y = lo_y; y <= hi_y; ++y) {
      for (int x = lo_x; x <= hi_x; ++x) {
        const double dx = x + 0.5 - s.center[0];
        const double dy = y + 0.5 - s.center[1];
        const double dz = z + 0.5 - s.center[2];
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (std::abs(d - s.radius) > 0.5) continue;
        const double lon = std::atan2(dy, dx);
        const double lat = std::asin(std::clamp(dz / d, -1.0, 1.0));
        const int i = static_cast<int>(std::floor((lon + M_PI) / (2 * M_PI) * s.checker + s.phase));
        const int j = static_cast<int>(std::floor((lat + M_PI / 2) / M_PI * (s.checker / 2)));
        pts.push_back({x, y, z});
        cols.push_back(((i + j) & 1) ? dark : light);
      }
    }
  }
}

void add_cube(const Coord& origin, int edge, std::vector<Coord>& pts, std::vector<Vec3>& cols) {
  const double span = std::max(1, edge - 1);
  for (int z = 0; z < edge; ++z) {
    for (int y = 0; y < edge; ++y) {
      for (int x = 0; x < edge; ++x) {
        const bool boundary = x == 0 || y == 0 || z == 0 || x == edge - 1 || y == edge - 1 || z == edge - 1;
        if (!boundary) continue;
        pts.push_back({origin[0] + x, origin[1] + y, origin[2] + z});
        cols.push_back({0.2 + 0.7 * x / span, 0.2 + 0.7 * y / span, 0.2 + 0.7 * z / span});
      }
    }
  }
}

}  // namespace

double synth_sphere_target(double radius) { return 4.0 * M_PI * (radius * radius + 1.0 / 12.0); }

int64_t synth_cube_count(int edge) {
  const int64_t a = edge;
  return edge <= 2 ? a * a * a : a * a * a - (a - 2) * (a - 2) * (a - 2);
}

double synth_sphere_radius(const SynthParams& p) {
  return p.radius > 0 ? p.radius : 0.21 * static_cast<double>(1 << p.bit_depth);
}

int synth_cube_edge(const SynthParams& p) {
  return p.radius > 0 ? static_cast<int>(std::lround(2 * p.radius)) : (1 << p.bit_depth) / 2;
}

PointCloud synth_sphere(const SynthParams& p) {
  check_depth(p.bit_depth);
  Rng rng = Rng(p.seed).split("synth/sphere");
  const double half = 0.5 * (1 << p.bit_depth);
  Sphere s{{half + rng.uniform(-0.5, 0.5), half + rng.uniform(-0.5, 0.5), half + rng.uniform(-0.5, 0.5)},
           synth_sphere_radius(p), rng.uniform(), std::max(2, p.checker)};
  if (s.radius + 1 >= half) throw ConfigError("synth: sphere radius does not fit the grid");
  std::vector<Coord> pts;
  std::vector<Vec3> cols;
  add_sphere(s, p.bit_depth, pts, cols);
  return canonicalize(std::move(pts), std::move(cols), p.bit_depth);
}

PointCloud synth_cube(const SynthParams& p) {
  check_depth(p.bit_depth);
  Rng rng = Rng(p.seed).split("synth/cube");
  const int side = 1 << p.bit_depth;
  const int edge = synth_cube_edge(p);
  if (edge < 1 || edge + 2 > side) throw ConfigError("synth: cube edge does not fit the grid");
  const int base = (side - edge) / 2;
  Coord origin{};
  for (int a = 0; a < 3; ++a) origin[a] = base + static_cast<int>(rng.below(3)) - 1;
  std::vector<Coord> pts;
  std::vector<Vec3> cols;
  add_cube(origin, edge, pts, cols);
  return canonicalize(std::move(pts), std::move(cols), p.bit_depth);
}

PointCloud synth_union(const SynthParams& p) {
  check_depth(p.bit_depth);
  Rng rng = Rng(p.seed).split("synth/union");
  const double side = 1 << p.bit_depth;
  Sphere s{{0.3 * side + rng.uniform(-0.5, 0.5), 0.5 * side + rng.uniform(-0.5, 0.5), 0.5 * side},
           0.17 * side, rng.uniform(), std::max(2, p.checker)};
  const int edge = static_cast<int>(0.3 * side);
  const Coord origin{static_cast<int32_t>(0.55 * side), static_cast<int32_t>(0.5 * side - edge / 2),
                     static_cast<int32_t>(0.5 * side - edge / 2)};
  std::vector<Coord> pts;
  std::vector<Vec3> cols;
  add_sphere(s, p.bit_depth, pts, cols);
  add_cube(origin, edge, pts, cols);
  return canonicalize(std::move(pts), std::move(cols), p.bit_depth);
}

PointCloud synth(const std::string& kind, const SynthParams& p) {
  if (kind == "sphere") return synth_sphere(p);
  if (kind == "cube") return synth_cube(p);
  if (kind == "union") return synth_union(p);
  throw ConfigError("synth: unknown kind '" + kind + "' (expected sphere, cube or union)");
}

}  // namespace b2p::voxel
