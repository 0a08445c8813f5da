#pragma once

#include <span>
#include <vector>

#include "b2p/common.hpp"
#include "b2p/voxel/point_cloud.hpp"

namespace b2p::voxel {

// Coordinate sets for octree levels base..depth with parent/child maps.
// Every level is Morton-sorted, so the children of one parent occupy a
// contiguous index range of the next level.
class OctreeHierarchy {
 public:
  OctreeHierarchy() = default;
  // `finest` must be Morton-sorted and unique at level `depth`.
  OctreeHierarchy(std::vector<Coord> finest, int depth, int base_level);

  int base_level() const { return base_; }
  int depth() const { return depth_; }
  bool has_level(int n) const { return n >= base_ && n <= depth_; }

  const std::vector<Coord>& coords(int n) const;
  size_t size(int n) const { return coords(n).size(); }

  // For level n > base: index of each point's parent at level n-1.
  std::span<const int32_t> parents(int n) const;
  // For level n < depth: CSR offsets (size(n)+1 entries) into level n+1.
  std::span<const int32_t> child_offsets(int n) const;

 private:
  int base_ = 0;
  int depth_ = 0;
  std::vector<std::vector<Coord>> coords_;
  std::vector<std::vector<int32_t>> parent_;
  std::vector<std::vector<int32_t>> child_begin_;
};

// Throws ConfigError when base_level > pc.bit_depth or the cloud is empty.
OctreeHierarchy build_hierarchy(const PointCloud& pc, int base_level);

}  // namespace b2p::voxel
