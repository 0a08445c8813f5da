#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "b2p/common.hpp"
#include "b2p/voxel/hierarchy.hpp"

namespace b2p::codec {

// Breadth-first octree occupancy from the root down to `depth`: one byte per
// occupied node of levels 0..depth-1, bit d set when child
// (2u + (d&1, d>>1&1, d>>2&1)) is occupied. `points` must be Morton-sorted
// and unique at level `depth`.
std::vector<uint8_t> encode_geometry(std::span<const Coord> points, int depth);
std::vector<uint8_t> encode_geometry(const voxel::OctreeHierarchy& hier);

// Morton-sorted level-`depth` coordinates. Throws FormatError on a byte
// count mismatch or an empty occupancy byte.
std::vector<Coord> decode_geometry_points(std::span<const uint8_t> bytes, int depth);
voxel::OctreeHierarchy decode_geometry(std::span<const uint8_t> bytes, int depth, int base_level);

}  // namespace b2p::codec
