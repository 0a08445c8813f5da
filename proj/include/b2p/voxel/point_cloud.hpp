#pragma once

#include <filesystem>
#include <vector>

#include "b2p/common.hpp"

namespace b2p::voxel {

struct PointCloud {
  std::vector<Coord> points;  // Morton-sorted, unique
  std::vector<Vec3> colors;   // RGB in [0, 1]
  int bit_depth = 10;

  size_t size() const { return points.size(); }
};

// Quantizes raw positions by rounding, checks them against [0, 2^bit_depth),
// merges duplicates by averaging their colors and sorts into Morton order.
PointCloud voxelize(const std::vector<Vec3>& positions, const std::vector<Vec3>& colors, int bit_depth);

// Sorts an integer cloud into canonical order, merging duplicates.
PointCloud canonicalize(std::vector<Coord> points, std::vector<Vec3> colors, int bit_depth);

// Checks the PointCloud invariants; throws on violation.
void validate(const PointCloud& pc);

enum class PlyEncoding { kAscii, kBinaryLittleEndian };

// Reads x,y,z + red,green,blue vertex properties. Integer colors are scaled
// from 0..255 to [0,1]; float colors are taken as already normalized.
PointCloud load_ply(const std::filesystem::path& path, int bit_depth);

void save_ply(const std::filesystem::path& path, const PointCloud& pc,
              PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

}  // namespace b2p::voxel
