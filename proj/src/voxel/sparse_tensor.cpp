#include "b2p/voxel/sparse_tensor.hpp"

#include <string>

#include "b2p/error.hpp"

namespace b2p::voxel {
namespace {

void check_level(const SparseTensor& t, const OctreeHierarchy& hier, const char* op) {
  if (!hier.has_level(t.level) || hier.coords(t.level) != t.coords) {
    throw ConsistencyError(std::string(op) + ": tensor coordinates do not match hierarchy level " +
                           std::to_string(t.level));
  }
  if (static_cast<size_t>(t.feats.rows()) != t.coords.size()) {
    throw ConsistencyError(std::string(op) + ": feature rows do not match coordinate count");
  }
}

}  // namespace

Matrix pool_rows(const Matrix& child_feats, std::span<const int32_t> child_offsets) {
  const Eigen::Index parents = static_cast<Eigen::Index>(child_offsets.size()) - 1;
  Matrix out(parents, child_feats.cols());
  for (Eigen::Index p = 0; p < parents; ++p) {
    const int32_t b = child_offsets[p];
    const int32_t e = child_offsets[p + 1];
    auto row = out.row(p);
    row = child_feats.row(b);
    for (int32_t c = b + 1; c < e; ++c) row += child_feats.row(c);
    row /= static_cast<double>(e - b);
  }
  return out;
}

Matrix upsample_rows(const Matrix& parent_feats, std::span<const int32_t> parents) {
  Matrix out(static_cast<Eigen::Index>(parents.size()), parent_feats.cols());
  for (size_t i = 0; i < parents.size(); ++i) out.row(i) = parent_feats.row(parents[i]);
  return out;
}

SparseTensor avg_pool_down(const SparseTensor& src, const OctreeHierarchy& hier) {
  check_level(src, hier, "avg_pool_down");
  if (src.level == hier.base_level()) throw ConsistencyError("avg_pool_down: already at base level");
  const int n = src.level - 1;
  return {n, hier.coords(n), pool_rows(src.feats, hier.child_offsets(n))};
}

SparseTensor upsample_copy(const SparseTensor& src, const OctreeHierarchy& hier) {
  check_level(src, hier, "upsample_copy");
  if (src.level == hier.depth()) throw ConsistencyError("upsample_copy: already at finest level");
  const int n = src.level + 1;
  return {n, hier.coords(n), upsample_rows(src.feats, hier.parents(n))};
}

}  // namespace b2p::voxel
