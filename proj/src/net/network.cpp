#include "b2p/net/network.hpp"

#include <cmath>
#include <memory>

#include "b2p/codec/gaussian_model.hpp"
#include "b2p/error.hpp"
#include "b2p/sparse/conv.hpp"
#include "b2p/splat/gaussian.hpp"

namespace b2p::net {

const sparse::KernelMap& LevelMaps::same(int level) {
  auto& slot = same_[level];
  if (!slot) {
    const auto& c = hier_->coords(level);
    slot = std::make_unique<sparse::KernelMap>(sparse::build_kernel_map(c, c, 3));
  }
  return *slot;
}

const std::vector<Coord>& LevelMaps::children(int level) {
  auto it = children_.find(level);
  if (it == children_.end()) it = children_.emplace(level, sparse::child_coords(hier_->coords(level))).first;
  return it->second;
}

const sparse::KernelMap& LevelMaps::children_map(int level) {
  auto& slot = child_maps_[level];
  if (!slot) {
    const auto& c = children(level);
    slot = std::make_unique<sparse::KernelMap>(sparse::build_kernel_map(c, c, 3));
  }
  return *slot;
}

Matrix voxel_centers(const std::vector<Coord>& coords, int level, int depth) {
  const double size = std::ldexp(1.0, depth - level);
  Matrix out(static_cast<Eigen::Index>(coords.size()), 3);
  for (size_t i = 0; i < coords.size(); ++i) {
    for (int k = 0; k < 3; ++k) out(static_cast<Eigen::Index>(i), k) = (coords[i][k] + 0.5) * size;
  }
  return out;
}

namespace {

const char* kChannelNames[splat::kGaussianParams] = {"mean x",  "mean y",  "mean z",  "scale x", "scale y",
                                                     "scale z", "quat w",  "quat x",  "quat y",  "quat z",
                                                     "opacity", "color r", "color g", "color b"};

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

ad::Var gaussian_activation(ad::Tape& t, ad::Var raw, const Matrix& centers, double voxel, GenMode mode) {
  const Matrix& r = t.value(raw);
  if (r.cols() != splat::kGaussianParams || r.rows() != centers.rows()) {
    throw DimensionError("gaussian activation: raw is " + std::to_string(r.rows()) + "x" + std::to_string(r.cols()) +
                         " for " + std::to_string(centers.rows()) + " centers");
  }
  const bool generative = mode == GenMode::kGenerative;
  Matrix out(r.rows(), r.cols());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (int c = 0; c < splat::kGaussianParams; ++c) {
      if (!std::isfinite(r(i, c))) {
        throw NumericError("gaussian generation: non-finite " + std::string(kChannelNames[c]) + " (channel " +
                           std::to_string(c) + ") at row " + std::to_string(i));
      }
    }
    for (int k = 0; k < 3; ++k) {
      out(i, splat::kColMean + k) = centers(i, k) + std::tanh(r(i, splat::kColMean + k)) * voxel;
      out(i, splat::kColScale + k) =
          std::clamp(std::exp(r(i, splat::kColScale + k)) * voxel / 2.0, kScaleMin, kScaleMaxVoxels * voxel);
      out(i, splat::kColColor + k) = sigmoid(r(i, splat::kColColor + k));
    }
    const auto q = r.row(i).segment<4>(splat::kColQuat);
    const double norm = q.norm();
    if (norm < kQuatNormMin) {
      out.row(i).segment<4>(splat::kColQuat) << 1.0, 0.0, 0.0, 0.0;
    } else {
      out.row(i).segment<4>(splat::kColQuat) = q / norm;
    }
    out(i, splat::kColOpacity) = generative ? sigmoid(r(i, splat::kColOpacity)) : 1.0;
  }
  return t.record(std::move(out), {raw}, [raw, voxel, generative](ad::Tape& tp, const Matrix& g) {
    const Matrix& r = tp.value(raw);
    Matrix gr = Matrix::Zero(r.rows(), r.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const int cm = splat::kColMean + k, cs = splat::kColScale + k, cc = splat::kColColor + k;
        const double th = std::tanh(r(i, cm));
        gr(i, cm) = g(i, cm) * voxel * (1.0 - th * th);
        const double s = std::exp(r(i, cs)) * voxel / 2.0;
        if (s > kScaleMin && s < kScaleMaxVoxels * voxel) gr(i, cs) = g(i, cs) * s;
        const double sc = sigmoid(r(i, cc));
        gr(i, cc) = g(i, cc) * sc * (1.0 - sc);
      }
      const Eigen::Vector4d q = r.row(i).segment<4>(splat::kColQuat).transpose();
      const double norm = q.norm();
      if (norm >= kQuatNormMin) {
        const Eigen::Vector4d u = q / norm;
        const Eigen::Vector4d gq = g.row(i).segment<4>(splat::kColQuat).transpose();
        gr.row(i).segment<4>(splat::kColQuat) = ((gq - u * u.dot(gq)) / norm).transpose();
      }
      if (generative) {
        const double so = sigmoid(r(i, splat::kColOpacity));
        gr(i, splat::kColOpacity) = g(i, splat::kColOpacity) * so * (1.0 - so);
      }
    }
    tp.accumulate(raw, gr);
  });
}

ad::InceptionVars Network::inception(const std::string& name) {
  return {cv(name + ".a1"), cv(name + ".a2"), cv(name + ".b1"), cv(name + ".b2"), cv(name + ".b3")};
}

ad::Var Network::convert(int level, ad::Var x) {
  const std::string n = "convert." + std::to_string(level);
  const auto& km = maps_.same(level);
  const auto l1 = cv(n + ".l1");
  ad::Var h = ad::geom_conv(t_, x, km, l1.w, l1.b);
  h = ad::inception_block(t_, h, km, inception(n + ".l2"), false);
  h = ad::inception_block(t_, h, km, inception(n + ".l3"), false);
  const auto l4 = cv(n + ".l4");
  return ad::geom_conv(t_, h, km, l4.w, l4.b);
}

ad::Var Network::squeeze(int level, ad::Var f, ad::Var ctx) {
  const std::string n = "squeeze." + std::to_string(level);
  const auto l1 = cv(n + ".l1"), l2 = cv(n + ".l2");
  const ad::Var h = ad::relu(t_, ad::linear(t_, ad::concat_cols(t_, f, ctx), l1.w, l1.b));
  return ad::linear(t_, h, l2.w, l2.b);
}

Network::EntropyParams Network::entropy(int level, ad::Var ctx) {
  const std::string n = "entropy." + std::to_string(level);
  const auto& km = maps_.same(level);
  const auto l1 = cv(n + ".l1");
  ad::Var h = ad::relu(t_, ad::geom_conv(t_, ctx, km, l1.w, l1.b));
  h = ad::inception_block(t_, h, km, inception(n + ".l2"), true);
  h = ad::inception_block(t_, h, km, inception(n + ".l3"), true);
  const auto mu = cv(n + ".mu"), sg = cv(n + ".sigma");
  const ad::Var s = ad::exp(t_, ad::linear(t_, h, sg.w, sg.b));
  return {ad::linear(t_, h, mu.w, mu.b), ad::clamp(t_, s, codec::kSigmaMin, codec::kSigmaMax)};
}

ad::Var Network::reconstruct(int level, ad::Var q, ad::Var ctx) {
  const std::string n = "reconstruct." + std::to_string(level);
  const auto& km = maps_.same(level);
  const auto l1 = cv(n + ".l1"), l4 = cv(n + ".l4");
  ad::Var h = ad::relu(t_, ad::linear(t_, ad::concat_cols(t_, q, ctx), l1.w, l1.b));
  h = ad::inception_block(t_, h, km, inception(n + ".l2"), false);
  h = ad::inception_block(t_, h, km, inception(n + ".l3"), false);
  return ad::linear(t_, h, l4.w, l4.b);
}

ad::Var Network::generate_raw(int m, ad::Var recon) {
  const ModelConfig& cfg = config();
  if (m < cfg.m_min || m > cfg.m_max) {
    throw LevelUnavailableError("no Gaussian generation head for level " + std::to_string(m) + " (model has " +
                                std::to_string(cfg.m_min) + ".." + std::to_string(cfg.m_max) + ")");
  }
  const std::string n = "generate." + std::to_string(m);
  const auto& km = maps_.same(m);
  const auto l1 = cv(n + ".l1"), l4 = cv(n + ".l4"), l7 = cv(n + ".l7");
  ad::Var h = ad::relu(t_, ad::geom_conv(t_, recon, km, l1.w, l1.b));
  h = ad::res_block(t_, h, km, res(n + ".l2"), false);
  h = ad::res_block(t_, h, km, res(n + ".l3"), false);
  const bool generative = mode_for(m, cfg.depth) == GenMode::kGenerative;
  const sparse::KernelMap* fine = &km;
  if (generative) {
    h = ad::transposed(t_, h, l4.w, l4.b);
    fine = &maps_.children_map(m);
  } else {
    h = ad::geom_conv(t_, h, km, l4.w, l4.b);
  }
  h = ad::res_block(t_, h, *fine, res(n + ".l5"), false);
  h = ad::res_block(t_, h, *fine, res(n + ".l6"), false);
  return ad::geom_conv(t_, h, *fine, l7.w, l7.b);
}

ad::Var Network::generate(int m, ad::Var recon) {
  const ModelConfig& cfg = config();
  const GenMode mode = mode_for(m, cfg.depth);
  const ad::Var raw = generate_raw(m, recon);
  const Matrix centers = mode == GenMode::kGenerative ? voxel_centers(maps_.children(m), m + 1, cfg.depth)
                                                      : voxel_centers(maps_.hierarchy().coords(m), m, cfg.depth);
  return gaussian_activation(t_, raw, centers, std::ldexp(1.0, cfg.depth - m), mode);
}

std::map<int, ad::Var> Network::extract(ad::Var rgb) {
  const ModelConfig& cfg = config();
  const auto& hier = maps_.hierarchy();
  if (hier.depth() != cfg.depth || hier.base_level() > cfg.base_level) {
    throw ConfigError("network: hierarchy levels " + std::to_string(hier.base_level()) + ".." +
                      std::to_string(hier.depth()) + " do not cover the model's " + std::to_string(cfg.base_level) +
                      ".." + std::to_string(cfg.depth));
  }
  std::map<int, ad::Var> out;
  ad::Var f = convert(cfg.depth, rgb);
  if (cfg.depth <= cfg.m_max) out[cfg.depth] = f;
  for (int n = cfg.depth - 1; n >= cfg.base_level; --n) {
    f = ad::pool(t_, f, hier.child_offsets(n));
    if (n <= cfg.m_max) {
      f = convert(n, f);
      out[n] = f;
    }
  }
  return out;
}

ad::Var Network::context(int level, const std::map<int, ad::Var>& recon) {
  const ModelConfig& cfg = config();
  if (level == cfg.base_level) {
    return t_.constant(Matrix::Zero(static_cast<Eigen::Index>(maps_.hierarchy().size(level)), cfg.channels));
  }
  const auto it = recon.find(level - 1);
  if (it == recon.end()) throw ContractError("network: level " + std::to_string(level - 1) + " not reconstructed");
  return ad::upsample(t_, it->second, maps_.hierarchy().parents(level));
}

}  // namespace b2p::net
