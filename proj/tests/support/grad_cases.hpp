#pragma once

// Finite-difference cases shared by the unit tests and the acceptance run.

#include <memory>
#include <string>
#include <vector>

#include "fd.hpp"
#include "models.hpp"
#include "naive.hpp"
#include "scenes.hpp"

#include "b2p/ad/losses.hpp"
#include "b2p/ad/ops.hpp"
#include "b2p/net/network.hpp"
#include "b2p/sparse/kernel_map.hpp"
#include "b2p/voxel/hierarchy.hpp"
#include "b2p/voxel/point_cloud.hpp"

namespace b2p::testing {

struct GradCase {
  std::string name;
  double tolerance = 1e-4;
  FdReport report;
};

// Random two-level hierarchy with at most `n` finest points at level 4.
inline std::shared_ptr<voxel::OctreeHierarchy> small_hierarchy(Rng& rng, size_t n) {
  auto pts = random_coords(rng, n, 16);
  std::vector<Vec3> cols(pts.size(), Vec3{0, 0, 0});
  auto pc = voxel::canonicalize(std::move(pts), std::move(cols), 4);
  return std::make_shared<voxel::OctreeHierarchy>(pc.points, 4, 3);
}

inline ad::Var weighted_sum(ad::Tape& t, ad::Var y, const Matrix& r) {
  return ad::sum(t, ad::mul(t, y, t.constant(r)));
}

inline Matrix bias_matrix(Rng& rng, Eigen::Index c) { return random_matrix(rng, 1, c, 0.1); }

inline GradCase conv_case(Rng& rng, bool geom, int probes) {
  auto h = small_hierarchy(rng, 30);
  auto km = std::make_shared<sparse::KernelMap>(sparse::build_kernel_map(h->coords(4), h->coords(4), 3));
  const Eigen::Index n = static_cast<Eigen::Index>(h->size(4));
  const Matrix r = random_matrix(rng, n, 5);
  BuildFn f = [km, r, geom](ad::Tape& t, const std::vector<ad::Var>& v) {
    const ad::Var y = geom ? ad::geom_conv(t, v[0], *km, v[1], v[2]) : ad::conv(t, v[0], *km, v[1], v[2]);
    return weighted_sum(t, y, r);
  };
  GradCase c{geom ? "geometry-invariant conv" : "sparse conv"};
  c.report = fd_check({random_matrix(rng, n, 4), random_matrix(rng, 27 * 4, 5, 0.2), bias_matrix(rng, 5)}, f, rng, probes);
  return c;
}

inline GradCase transposed_case(Rng& rng, int probes) {
  const Matrix r = random_matrix(rng, 8 * 12, 5);
  BuildFn f = [r](ad::Tape& t, const std::vector<ad::Var>& v) {
    return weighted_sum(t, ad::transposed(t, v[0], v[1], v[2]), r);
  };
  GradCase c{"transposed conv"};
  c.report = fd_check({random_matrix(rng, 12, 4), random_matrix(rng, 32, 5, 0.3), bias_matrix(rng, 5)}, f, rng, probes);
  return c;
}

inline GradCase linear_case(Rng& rng, int probes) {
  const Matrix r = random_matrix(rng, 20, 6);
  BuildFn f = [r](ad::Tape& t, const std::vector<ad::Var>& v) {
    return weighted_sum(t, ad::linear(t, v[0], v[1], v[2]), r);
  };
  GradCase c{"linear"};
  c.report = fd_check({random_matrix(rng, 20, 7), random_matrix(rng, 7, 6, 0.3), bias_matrix(rng, 6)}, f, rng, probes);
  return c;
}

// Four layers touching every elementwise and structural primitive.
inline GradCase composition_case(Rng& rng, int probes) {
  auto h = small_hierarchy(rng, 30);
  auto km = std::make_shared<sparse::KernelMap>(sparse::build_kernel_map(h->coords(4), h->coords(4), 3));
  const Eigen::Index n = static_cast<Eigen::Index>(h->size(4));
  const Eigen::Index np = static_cast<Eigen::Index>(h->size(3));
  const Matrix r1 = random_matrix(rng, 8 * np, 3), r2 = random_matrix(rng, n, 4);
  BuildFn f = [h, km, r1, r2](ad::Tape& t, const std::vector<ad::Var>& v) {
    using namespace ad;
    const Var h1 = ad::tanh(t, geom_conv(t, v[0], *km, v[1], v[2]));
    const Var h2 = sigmoid(t, conv(t, h1, *km, v[3], v[4]));
    const Var c = concat_cols(t, h1, relu(t, h2));
    const Var h3 = linear(t, c, v[5], v[6]);
    const Var p = pool(t, h3, h->child_offsets(3));
    const Var u = upsample(t, ad::exp(t, scale(t, p, 0.5)), h->parents(4));
    const Var s = clamp(t, mul(t, u, slice_cols(t, c, 2, 4)), -0.6, 0.6);
    const Var tr = transposed(t, p, v[7], v[8]);
    return add(t, weighted_sum(t, tr, r1), mean(t, mul(t, sub(t, s, h3), t.constant(r2))));
  };
  GradCase c{"primitive composition"};
  c.report = fd_check({random_matrix(rng, n, 4), random_matrix(rng, 108, 4, 0.2), bias_matrix(rng, 4),
                       random_matrix(rng, 108, 4, 0.2), bias_matrix(rng, 4), random_matrix(rng, 8, 4, 0.4),
                       bias_matrix(rng, 4), random_matrix(rng, 32, 3, 0.3), bias_matrix(rng, 3)},
                      f, rng, probes);
  return c;
}

inline GradCase block_case(Rng& rng, bool inception, bool geom, int probes) {
  auto h = small_hierarchy(rng, 30);
  auto km = std::make_shared<sparse::KernelMap>(sparse::build_kernel_map(h->coords(4), h->coords(4), 3));
  const Eigen::Index n = static_cast<Eigen::Index>(h->size(4));
  const Matrix r = random_matrix(rng, n, 8);
  std::vector<Matrix> in{random_matrix(rng, n, 8)};
  auto push = [&](Eigen::Index rows, Eigen::Index cout) {
    in.push_back(random_matrix(rng, rows, cout, 1.0 / std::sqrt(static_cast<double>(rows))));
    in.push_back(bias_matrix(rng, cout));
  };
  if (inception) {
    push(27 * 8, 2);  // a1
    push(27 * 2, 4);  // a2
    push(27 * 8, 2);  // b1
    push(2, 2);       // b2
    push(27 * 2, 4);  // b3
  } else {
    push(27 * 8, 8);
    push(27 * 8, 8);
  }
  BuildFn f = [km, r, inception, geom](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto cv = [&](int i) { return ad::ConvVars{v[1 + 2 * i], v[2 + 2 * i]}; };
    const ad::Var y = inception ? ad::inception_block(t, v[0], *km, {cv(0), cv(1), cv(2), cv(3), cv(4)}, geom)
                                : ad::res_block(t, v[0], *km, {cv(0), cv(1)}, geom);
    return weighted_sum(t, y, r);
  };
  GradCase c{std::string(inception ? "inception block" : "res block") + (geom ? " (geometry-invariant)" : "")};
  c.report = fd_check(in, f, rng, probes);
  return c;
}

inline GradCase rate_case(Rng& rng, int probes) {
  Matrix x(12, 8), mu(12, 8), sigma(12, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    mu.data()[i] = rng.uniform(-4.0, 4.0);
    sigma.data()[i] = rng.uniform(0.3, 6.0);
    x.data()[i] = mu.data()[i] + rng.uniform(-2.0, 2.0) * sigma.data()[i];
  }
  BuildFn f = [](ad::Tape& t, const std::vector<ad::Var>& v) { return ad::rate_bits(t, v[0], v[1], v[2]); };
  GradCase c{"rate loss"};
  c.report = fd_check({x, mu, sigma}, f, rng, probes);
  return c;
}

inline GradCase ssim_case(Rng& rng, int probes) {
  Image target(16, 16);
  for (double& v : target.data) v = rng.uniform();
  Matrix x(256, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  BuildFn f = [target](ad::Tape& t, const std::vector<ad::Var>& v) { return ad::ssim_loss(t, v[0], target); };
  GradCase c{"ssim loss"};
  c.report = fd_check({x}, f, rng, probes);
  return c;
}

inline GradCase l1_case(Rng& rng, int probes) {
  Image target(8, 8);
  for (double& v : target.data) v = rng.uniform();
  Matrix x(64, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  BuildFn f = [target](ad::Tape& t, const std::vector<ad::Var>& v) { return ad::l1_loss(t, v[0], target); };
  GradCase c{"l1 loss"};
  c.report = fd_check({x}, f, rng, probes);
  return c;
}

inline GradCase render_case(Rng& rng, int probes) {
  const auto scene = random_scene(rng, 6, 1.5);
  const splat::Camera cam = front_camera(12, 10, 10.0);
  const Matrix r = random_matrix(rng, 120, 3);
  BuildFn f = [cam, r](ad::Tape& t, const std::vector<ad::Var>& v) {
    return weighted_sum(t, ad::render(t, v[0], cam), r);
  };
  GradCase c{"rasterizer", 1e-3};
  c.report = fd_check({splat::to_matrix(scene)}, f, rng, probes, 1e-5, 1e-4);
  return c;
}

// One network module of a narrow model: probes its inputs and every
// parameter under its name prefix. `module` is one of convert, squeeze,
// entropy, reconstruct, generate.
inline GradCase module_case(Rng& rng, const std::string& module, int level, int probes) {
  const net::ModelConfig cfg = small_config(8, 4);
  auto model = std::make_shared<net::B2PModel>(net::B2PModel::initialize(cfg, rng.next_u64()));
  for (size_t i = 0; i < model->params().size(); ++i) {
    if (model->params().at(i).shape.size() == 1) model->params().value(i) = random_matrix(rng, 1, model->params().value(i).cols(), 0.1);
  }
  auto pc = std::make_shared<voxel::PointCloud>(random_cloud(rng, 40, cfg.depth));
  auto hier = std::make_shared<voxel::OctreeHierarchy>(voxel::build_hierarchy(*pc, cfg.base_level));
  auto maps = std::make_shared<net::LevelMaps>(*hier);
  const Eigen::Index n = static_cast<Eigen::Index>(hier->size(level));
  std::vector<Matrix> in;
  if (module == "convert") {
    in.push_back(random_matrix(rng, n, level == cfg.depth ? 3 : 8));
  } else if (module == "squeeze" || module == "reconstruct") {
    in.push_back(random_matrix(rng, n, module == "squeeze" ? 8 : 4));
    in.push_back(random_matrix(rng, n, 8));
  } else {
    in.push_back(random_matrix(rng, n, 8));
  }
  const size_t first_param = in.size();
  std::vector<size_t> idx;
  const std::string prefix = module + "." + std::to_string(level) + ".";
  for (size_t i = 0; i < model->params().size(); ++i) {
    if (model->params().at(i).name.rfind(prefix, 0) == 0) {
      idx.push_back(i);
      in.push_back(model->params().value(i));
    }
  }
  const Eigen::Index rows = module == "generate" && net::mode_for(level, cfg.depth) == net::GenMode::kGenerative ? 8 * n : n;
  const Matrix r1 = random_matrix(rng, rows, module == "generate" ? 14 : (module == "convert" || module == "reconstruct" ? 8 : 4));
  const Matrix r2 = random_matrix(rng, n, 4);
  BuildFn f = [=](ad::Tape& t, const std::vector<ad::Var>& v) {
    for (size_t k = 0; k < idx.size(); ++k) t.bind_param(idx[k], v[first_param + k]);
    net::Network net(t, *model, *maps);
    (void)pc;
    if (module == "convert") return weighted_sum(t, net.convert(level, v[0]), r1);
    if (module == "squeeze") return weighted_sum(t, net.squeeze(level, v[0], v[1]), r1);
    if (module == "reconstruct") return weighted_sum(t, net.reconstruct(level, v[0], v[1]), r1);
    if (module == "entropy") {
      const auto ep = net.entropy(level, v[0]);
      return ad::add(t, weighted_sum(t, ep.mu, r1), weighted_sum(t, ep.sigma, r2));
    }
    return weighted_sum(t, net.generate(level, v[0]), r1);
  };
  GradCase c{module + " (level " + std::to_string(level) + ")"};
  c.report = fd_check(in, f, rng, probes);
  return c;
}

}  // namespace b2p::testing
