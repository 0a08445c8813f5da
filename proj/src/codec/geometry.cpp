#include "b2p/codec/geometry.hpp"

#include <string>

#include "b2p/error.hpp"
#include "b2p/voxel/morton.hpp"

namespace b2p::codec {
namespace {

Coord child(const Coord& p, int d) { return {2 * p[0] + (d & 1), 2 * p[1] + ((d >> 1) & 1), 2 * p[2] + ((d >> 2) & 1)}; }

}  // namespace

std::vector<uint8_t> encode_geometry(std::span<const Coord> points, int depth) {
  if (depth < 1 || depth > voxel::kMaxMortonBits) throw ConfigError("geometry: unsupported depth " + std::to_string(depth));
  // Coarser levels by halving; Morton order is preserved and duplicates
  // are adjacent.
  std::vector<std::vector<Coord>> levels(depth + 1);
  levels[depth].assign(points.begin(), points.end());
  for (int n = depth; n > 0; --n) {
    auto& up = levels[n - 1];
    for (const Coord& c : levels[n]) {
      const Coord p{c[0] >> 1, c[1] >> 1, c[2] >> 1};
      if (up.empty() || up.back() != p) up.push_back(p);
    }
  }
  std::vector<uint8_t> out;
  for (int n = 0; n < depth; ++n) {
    const auto& kids = levels[n + 1];
    size_t j = 0;
    for (const Coord& p : levels[n]) {
      uint8_t byte = 0;
      for (int d = 0; d < 8 && j < kids.size(); ++d) {
        if (kids[j] == child(p, d)) {
          byte |= static_cast<uint8_t>(1u << d);
          ++j;
        }
      }
      out.push_back(byte);
    }
    if (j != kids.size()) throw ConsistencyError("geometry: points are not Morton-sorted and unique");
  }
  return out;
}

std::vector<uint8_t> encode_geometry(const voxel::OctreeHierarchy& hier) {
  return encode_geometry(hier.coords(hier.depth()), hier.depth());
}

std::vector<Coord> decode_geometry_points(std::span<const uint8_t> bytes, int depth) {
  if (depth < 1 || depth > voxel::kMaxMortonBits) throw ConfigError("geometry: unsupported depth " + std::to_string(depth));
  std::vector<Coord> level{{0, 0, 0}};
  size_t pos = 0;
  for (int n = 0; n < depth; ++n) {
    std::vector<Coord> next;
    for (const Coord& p : level) {
      if (pos >= bytes.size()) throw FormatError("geometry: occupancy ends early at level " + std::to_string(n + 1));
      const uint8_t byte = bytes[pos++];
      if (byte == 0) throw FormatError("geometry: empty occupancy byte at level " + std::to_string(n + 1));
      for (int d = 0; d < 8; ++d)
        if (byte & (1u << d)) next.push_back(child(p, d));
    }
    level = std::move(next);
  }
  if (pos != bytes.size()) throw FormatError("geometry: " + std::to_string(bytes.size() - pos) + " trailing bytes");
  return level;
}

voxel::OctreeHierarchy decode_geometry(std::span<const uint8_t> bytes, int depth, int base_level) {
  return voxel::OctreeHierarchy(decode_geometry_points(bytes, depth), depth, base_level);
}

}  // namespace b2p::codec
