#pragma once

#include <span>
#include <vector>

#include "b2p/common.hpp"
#include "b2p/voxel/hierarchy.hpp"

namespace b2p::voxel {

struct SparseTensor {
  int level = 0;
  std::vector<Coord> coords;  // Morton-sorted, unique
  Matrix feats;               // coords.size() x channels

  size_t size() const { return coords.size(); }
  Eigen::Index channels() const { return feats.cols(); }
};

// Mean of each parent's occupied children (divides by the occupied count).
SparseTensor avg_pool_down(const SparseTensor& src, const OctreeHierarchy& hier);

// Zero-order hold: every child receives its parent's row.
SparseTensor upsample_copy(const SparseTensor& src, const OctreeHierarchy& hier);

// Row kernels shared with the differentiable ops.
Matrix pool_rows(const Matrix& child_feats, std::span<const int32_t> child_offsets);
Matrix upsample_rows(const Matrix& parent_feats, std::span<const int32_t> parents);

}  // namespace b2p::voxel
