#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "b2p/ad/ops.hpp"
#include "b2p/net/model.hpp"
#include "b2p/sparse/kernel_map.hpp"
#include "b2p/voxel/hierarchy.hpp"

namespace b2p::net {

inline constexpr double kScaleMin = 1e-4;
inline constexpr double kScaleMaxVoxels = 4.0;
inline constexpr double kQuatNormMin = 1e-8;

// K=3 kernel maps of a hierarchy's levels and of their 8x sub-point sets,
// built on first use. References stay valid for the object's lifetime.
class LevelMaps {
 public:
  explicit LevelMaps(const voxel::OctreeHierarchy& hier) : hier_(&hier) {}

  const voxel::OctreeHierarchy& hierarchy() const { return *hier_; }
  const sparse::KernelMap& same(int level);
  // All eight children of every level-n voxel, row 8p + d for child d.
  const std::vector<Coord>& children(int level);
  const sparse::KernelMap& children_map(int level);

 private:
  const voxel::OctreeHierarchy* hier_;
  std::map<int, std::unique_ptr<sparse::KernelMap>> same_, child_maps_;
  std::map<int, std::vector<Coord>> children_;
};

// Continuous centers (c + 0.5) * 2^(N - level) of level coordinates.
Matrix voxel_centers(const std::vector<Coord>& coords, int level, int depth);

// Maps raw 14-channel rows to Gaussian parameters in splat row layout:
// mean = center + tanh(raw) * voxel, scale = clamp(exp(raw) * voxel / 2,
// 1e-4, 4 voxel), quaternion normalized (identity below norm 1e-8),
// opacity sigmoid (generative) or 1 (direct), color sigmoid. Throws
// NumericError naming the channel of a non-finite raw value.
ad::Var gaussian_activation(ad::Tape& t, ad::Var raw, const Matrix& centers, double voxel, GenMode mode);

// The five modules of one model bound to a tape and a hierarchy.
class Network {
 public:
  Network(ad::Tape& t, const B2PModel& model, LevelMaps& maps) : t_(t), model_(model), maps_(maps) {}

  ad::Tape& tape() { return t_; }
  const ModelConfig& config() const { return model_.config(); }

  ad::Var convert(int level, ad::Var x);
  ad::Var squeeze(int level, ad::Var f, ad::Var ctx);
  struct EntropyParams {
    ad::Var mu, sigma;
  };
  EntropyParams entropy(int level, ad::Var ctx);
  ad::Var reconstruct(int level, ad::Var q, ad::Var ctx);
  // 14 raw channels: one row per point (direct) or per sub-point (generative).
  ad::Var generate_raw(int m, ad::Var recon);
  ad::Var generate(int m, ad::Var recon);

  // Converted features at levels L..M_max from level-N colors.
  std::map<int, ad::Var> extract(ad::Var rgb);
  // Zeros at L, otherwise the parent's reconstruction copied to children.
  ad::Var context(int level, const std::map<int, ad::Var>& recon);

 private:
  ad::Var p(const std::string& name) { return t_.param(model_.params(), name); }
  ad::ConvVars cv(const std::string& name) { return {p(name + ".w"), p(name + ".b")}; }
  ad::InceptionVars inception(const std::string& name);
  ad::ResVars res(const std::string& name) { return {cv(name + ".c1"), cv(name + ".c2")}; }

  ad::Tape& t_;
  const B2PModel& model_;
  LevelMaps& maps_;
};

}  // namespace b2p::net
