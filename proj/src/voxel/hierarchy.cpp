#include "b2p/voxel/hierarchy.hpp"

#include <string>

#include "b2p/error.hpp"

namespace b2p::voxel {

OctreeHierarchy::OctreeHierarchy(std::vector<Coord> finest, int depth, int base_level)
    : base_(base_level), depth_(depth) {
  if (base_level < 0 || base_level > depth) {
    throw ConfigError("build_hierarchy: base level " + std::to_string(base_level) + " exceeds bit depth " +
                      std::to_string(depth));
  }
  if (finest.empty()) throw ConfigError("build_hierarchy: empty point cloud");
  const int count = depth - base_level + 1;
  coords_.resize(count);
  parent_.resize(count);
  child_begin_.resize(count);
  coords_[count - 1] = std::move(finest);

  for (int n = depth; n > base_level; --n) {
    const auto& child = coords_[n - base_];
    auto& parent = coords_[n - 1 - base_];
    auto& parent_of = parent_[n - base_];
    auto& begin = child_begin_[n - 1 - base_];
    parent.reserve(child.size() / 2 + 1);
    parent_of.resize(child.size());
    // Children are Morton-sorted, so equal parents are adjacent.
    for (size_t i = 0; i < child.size(); ++i) {
      const Coord p{child[i][0] >> 1, child[i][1] >> 1, child[i][2] >> 1};
      if (parent.empty() || parent.back() != p) {
        parent.push_back(p);
        begin.push_back(static_cast<int32_t>(i));
      }
      parent_of[i] = static_cast<int32_t>(parent.size() - 1);
    }
    begin.push_back(static_cast<int32_t>(child.size()));
  }
}

const std::vector<Coord>& OctreeHierarchy::coords(int n) const {
  if (!has_level(n)) throw ConsistencyError("hierarchy has no level " + std::to_string(n));
  return coords_[n - base_];
}

std::span<const int32_t> OctreeHierarchy::parents(int n) const {
  if (!has_level(n) || n == base_) throw ConsistencyError("no parent map for level " + std::to_string(n));
  return parent_[n - base_];
}

std::span<const int32_t> OctreeHierarchy::child_offsets(int n) const {
  if (!has_level(n) || n == depth_) throw ConsistencyError("no child map for level " + std::to_string(n));
  return child_begin_[n - base_];
}

OctreeHierarchy build_hierarchy(const PointCloud& pc, int base_level) {
  if (base_level > pc.bit_depth) {
    throw ConfigError("build_hierarchy: L=" + std::to_string(base_level) + " > N=" + std::to_string(pc.bit_depth));
  }
  return OctreeHierarchy(pc.points, pc.bit_depth, base_level);
}

}  // namespace b2p::voxel
