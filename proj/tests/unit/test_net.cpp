#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "models.hpp"
#include "naive.hpp"

#include "b2p/voxel/synth.hpp"
#include "b2p/codec/bitstream.hpp"
#include "b2p/codec/gaussian_model.hpp"
#include "b2p/error.hpp"
#include "b2p/net/network.hpp"
#include "b2p/net/pipeline.hpp"
#include "b2p/sparse/blocks.hpp"
#include "b2p/splat/gaussian.hpp"
#include "b2p/voxel/sparse_tensor.hpp"

using namespace b2p;
using namespace b2p::net;
using b2p::testing::random_cloud;
using b2p::testing::random_matrix;
using b2p::testing::small_config;

namespace {

sparse::ConvParams cp(const B2PModel& m, const std::string& name) {
  return {m.params().value(m.params().index(name + ".w")), RowVector(m.params().value(m.params().index(name + ".b")).row(0))};
}

sparse::InceptionParams ip(const B2PModel& m, const std::string& n) {
  return {cp(m, n + ".a1"), cp(m, n + ".a2"), cp(m, n + ".b1"), cp(m, n + ".b2"), cp(m, n + ".b3")};
}

sparse::ResParams rp(const B2PModel& m, const std::string& n) { return {cp(m, n + ".c1"), cp(m, n + ".c2")}; }

void zero_params(B2PModel& m, const std::string& prefix) {
  for (size_t i = 0; i < m.params().size(); ++i) {
    if (m.params().at(i).name.rfind(prefix, 0) == 0) m.params().value(i).setZero();
  }
}

// Random biases so zero-bias initialization cannot hide a wiring error.
B2PModel test_model(const ModelConfig& cfg, uint64_t seed) {
  B2PModel m = B2PModel::initialize(cfg, seed);
  Rng rng(seed + 1);
  for (size_t i = 0; i < m.params().size(); ++i) {
    if (m.params().at(i).shape.size() == 1) {
      for (Eigen::Index k = 0; k < m.params().value(i).size(); ++k) m.params().value(i).data()[k] = 0.1 * rng.normal();
    }
  }
  m.params().round_to_float();
  return m;
}

struct Fixture {
  voxel::PointCloud pc;
  voxel::OctreeHierarchy hier;
  Fixture(uint64_t seed, size_t n, const ModelConfig& cfg) {
    Rng rng(seed);
    pc = random_cloud(rng, n, cfg.depth);
    hier = voxel::build_hierarchy(pc, cfg.base_level);
  }
};

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("layout matches the appendix channel widths") {
  const ModelConfig cfg;  // N=10, L=7, M 8..9, 64 channels
  const auto specs = model_layout(cfg);
  std::map<std::string, std::vector<int>> shape;
  for (const auto& s : specs) shape[s.name] = s.shape;
  CHECK(shape.at("convert.10.l1.w") == std::vector<int>{27, 3, 64});
  CHECK(shape.at("convert.7.l1.w") == std::vector<int>{27, 64, 64});
  CHECK(shape.at("convert.9.l4.w") == std::vector<int>{27, 64, 64});
  CHECK(shape.at("convert.9.l2.a1.w") == std::vector<int>{27, 64, 16});
  CHECK(shape.at("convert.9.l2.a2.w") == std::vector<int>{27, 16, 32});
  CHECK(shape.at("convert.9.l2.b2.w") == std::vector<int>{16, 16});
  CHECK(shape.count("convert.6.l1.w") == 0);
  CHECK(shape.at("squeeze.7.l1.w") == std::vector<int>{128, 64});
  CHECK(shape.at("squeeze.9.l2.w") == std::vector<int>{64, 8});
  CHECK(shape.at("entropy.8.l1.w") == std::vector<int>{27, 64, 64});
  CHECK(shape.at("entropy.8.mu.w") == std::vector<int>{64, 8});
  CHECK(shape.at("entropy.8.sigma.w") == std::vector<int>{64, 8});
  CHECK(shape.at("reconstruct.7.l1.w") == std::vector<int>{72, 64});
  CHECK(shape.at("reconstruct.7.l4.w") == std::vector<int>{64, 64});
  CHECK(shape.at("generate.8.l4.w") == std::vector<int>{8, 64, 64});
  CHECK(shape.at("generate.9.l4.w") == std::vector<int>{27, 64, 64});
  CHECK(shape.at("generate.9.l7.w") == std::vector<int>{27, 64, 14});
  CHECK(shape.at("generate.9.l7.b") == std::vector<int>{14});
  CHECK(shape.count("generate.7.l1.w") == 0);
  CHECK(mode_for(8, 10) == GenMode::kGenerative);
  CHECK(mode_for(9, 10) == GenMode::kDirect);
  CHECK(mode_for(10, 10) == GenMode::kDirect);
}

TEST_CASE("audit rejects mismatched checkpoints") {
  const ModelConfig cfg = small_config();
  B2PModel m = B2PModel::initialize(cfg, 1);
  CHECK_NOTHROW(audit(cfg, m.params()));
  sparse::ParamStore bad;
  for (const auto& e : m.params()) {
    if (e.name == "squeeze.3.l2.w") {
      bad.add(e.name, {16, 5}, Matrix::Zero(16, 5));
    } else {
      bad.add(e.name, e.shape, e.value);
    }
  }
  CHECK_THROWS_WITH_AS(audit(cfg, bad), doctest::Contains("squeeze.3.l2.w"), ConfigError);
  sparse::ParamStore missing;
  for (size_t i = 0; i + 1 < m.params().size(); ++i) missing.add(m.params().at(i).name, m.params().at(i).shape, m.params().value(i));
  CHECK_THROWS_AS(audit(cfg, missing), ConfigError);
  ModelConfig wrong = cfg;
  wrong.m_min = 1;
  CHECK_THROWS_AS(wrong.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip preserves the model hash") {
  const B2PModel m = B2PModel::initialize(small_config(), 7);
  const auto path = std::filesystem::temp_directory_path() / "b2p_test_model.ckpt";
  m.save(path);
  const B2PModel back = B2PModel::load(path);
  CHECK(back.hash() == m.hash());
  CHECK(back.hash() == sparse::load_checkpoint(path).model_hash);
  for (size_t i = 0; i < m.params().size(); ++i) CHECK(back.params().value(i) == m.params().value(i));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(B2PModel::load(path), MissingInputError);
  CHECK(B2PModel::initialize(small_config(), 7).hash() == m.hash());
  CHECK(B2PModel::initialize(small_config(), 8).hash() != m.hash());
}

TEST_CASE("feature_convert") {
  const ModelConfig cfg = small_config();
  Fixture fx(3, 300, cfg);
  B2PModel m = test_model(cfg, 3);
  LevelMaps maps(fx.hier);
  const auto& km = maps.same(5);
  const voxel::SparseTensor x{5, fx.hier.coords(5), color_matrix(fx.pc)};

  ad::Tape t(false);
  Network net(t, m, maps);
  const Matrix got = t.value(net.convert(5, t.constant(x.feats)));
  auto h = sparse::geom_invariant_conv(x, km, cp(m, "convert.5.l1"));
  h = sparse::inception_res_block(h, km, ip(m, "convert.5.l2"), false);
  h = sparse::inception_res_block(h, km, ip(m, "convert.5.l3"), false);
  h = sparse::geom_invariant_conv(h, km, cp(m, "convert.5.l4"));
  CHECK(got.rows() == static_cast<Eigen::Index>(fx.hier.size(5)));
  CHECK(got.cols() == 16);
  CHECK(max_abs(got, h.feats) <= 1e-9);

  // Zeroed blocks pass ReLU of their input through.
  zero_params(m, "convert.5.l2");
  zero_params(m, "convert.5.l3");
  ad::Tape t2(false);
  Network net2(t2, m, maps);
  const Matrix collapsed = t2.value(net2.convert(5, t2.constant(x.feats)));
  auto a = sparse::geom_invariant_conv(x, km, cp(m, "convert.5.l1"));
  a.feats = a.feats.cwiseMax(0.0);
  CHECK(max_abs(collapsed, sparse::geom_invariant_conv(a, km, cp(m, "convert.5.l4")).feats) <= 1e-12);
}

TEST_CASE("feature_squeeze") {
  const ModelConfig cfg = small_config();
  Fixture fx(4, 200, cfg);
  const B2PModel m = test_model(cfg, 4);
  LevelMaps maps(fx.hier);
  Rng rng(4);
  const Eigen::Index n = static_cast<Eigen::Index>(fx.hier.size(4));
  const Matrix f = random_matrix(rng, n, 16), ctx = random_matrix(rng, n, 16);
  ad::Tape t(false);
  Network net(t, m, maps);
  const Matrix got = t.value(net.squeeze(4, t.constant(f), t.constant(ctx)));
  Matrix cat(n, 32);
  cat << f, ctx;
  const auto l1 = cp(m, "squeeze.4.l1"), l2 = cp(m, "squeeze.4.l2");
  const Matrix h = testing::naive_relu(testing::naive_linear(cat, l1.weights, &*l1.bias));
  CHECK(max_abs(got, testing::naive_linear(h, l2.weights, &*l2.bias)) <= 1e-12);
  CHECK(got.cols() == 4);

  // With zero context the output depends on x alone.
  const Matrix z = Matrix::Zero(n, 16);
  const Matrix a = t.value(net.squeeze(4, t.constant(f), t.constant(z)));
  Matrix cat0(n, 32);
  cat0 << f, z;
  const Matrix h0 = testing::naive_relu(testing::naive_linear(cat0, l1.weights, &*l1.bias));
  CHECK(max_abs(a, testing::naive_linear(h0, l2.weights, &*l2.bias)) <= 1e-12);
}

TEST_CASE("entropy_predict") {
  const ModelConfig cfg = small_config();
  Fixture fx(5, 250, cfg);
  B2PModel m = test_model(cfg, 5);
  LevelMaps maps(fx.hier);
  const auto& km = maps.same(3);
  Rng rng(5);
  const voxel::SparseTensor ctx{3, fx.hier.coords(3), random_matrix(rng, static_cast<Eigen::Index>(fx.hier.size(3)), 16)};
  ad::Tape t(false);
  Network net(t, m, maps);
  const auto ep = net.entropy(3, t.constant(ctx.feats));
  auto h = sparse::geom_invariant_conv(ctx, km, cp(m, "entropy.3.l1"));
  h.feats = h.feats.cwiseMax(0.0);
  h = sparse::inception_res_block(h, km, ip(m, "entropy.3.l2"), true);
  h = sparse::inception_res_block(h, km, ip(m, "entropy.3.l3"), true);
  const auto mu = cp(m, "entropy.3.mu"), sg = cp(m, "entropy.3.sigma");
  const Matrix mu_ref = testing::naive_linear(h.feats, mu.weights, &*mu.bias);
  const Matrix s_ref = testing::naive_linear(h.feats, sg.weights, &*sg.bias).array().exp().max(codec::kSigmaMin).min(codec::kSigmaMax);
  CHECK(max_abs(t.value(ep.mu), mu_ref) <= 1e-9);
  CHECK(max_abs(t.value(ep.sigma), s_ref) <= 1e-9);
  CHECK(t.value(ep.sigma).minCoeff() > 0.0);

  zero_params(m, "entropy.3.mu");
  zero_params(m, "entropy.3.sigma");
  ad::Tape t2(false);
  Network net2(t2, m, maps);
  const auto z = net2.entropy(3, t2.constant(ctx.feats));
  CHECK(t2.value(z.mu) == Matrix::Zero(ctx.feats.rows(), 4));
  CHECK(t2.value(z.sigma) == Matrix::Ones(ctx.feats.rows(), 4));
}

TEST_CASE("feature_reconstruct") {
  const ModelConfig cfg = small_config();
  Fixture fx(6, 250, cfg);
  const B2PModel m = test_model(cfg, 6);
  LevelMaps maps(fx.hier);
  const auto& km = maps.same(4);
  Rng rng(6);
  const Eigen::Index n = static_cast<Eigen::Index>(fx.hier.size(4));
  Matrix q = random_matrix(rng, n, 4, 3.0).array().round().matrix();
  const Matrix ctx = random_matrix(rng, n, 16);
  ad::Tape t(false);
  Network net(t, m, maps);
  const Matrix got = t.value(net.reconstruct(4, t.constant(q), t.constant(ctx)));
  const Matrix again = t.value(net.reconstruct(4, t.constant(q), t.constant(ctx)));
  CHECK(got == again);
  Matrix cat(n, 20);
  cat << q, ctx;
  const auto l1 = cp(m, "reconstruct.4.l1"), l4 = cp(m, "reconstruct.4.l4");
  voxel::SparseTensor h{4, fx.hier.coords(4), testing::naive_relu(testing::naive_linear(cat, l1.weights, &*l1.bias))};
  h = sparse::inception_res_block(h, km, ip(m, "reconstruct.4.l2"), false);
  h = sparse::inception_res_block(h, km, ip(m, "reconstruct.4.l3"), false);
  CHECK(max_abs(got, testing::naive_linear(h.feats, l4.weights, &*l4.bias)) <= 1e-9);
}

namespace {

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar mapping of one raw row.
std::array<double, 14> oracle_row(const Matrix& raw, Eigen::Index i, const double* center, double voxel, bool gen) {
  std::array<double, 14> o{};
  for (int k = 0; k < 3; ++k) {
    o[k] = center[k] + std::tanh(raw(i, k)) * voxel;
    o[3 + k] = std::min(std::max(std::exp(raw(i, 3 + k)) * voxel / 2, 1e-4), 4 * voxel);
    o[11 + k] = sig(raw(i, 11 + k));
  }
  const double nq = std::sqrt(raw(i, 6) * raw(i, 6) + raw(i, 7) * raw(i, 7) + raw(i, 8) * raw(i, 8) + raw(i, 9) * raw(i, 9));
  for (int k = 0; k < 4; ++k) o[6 + k] = nq < 1e-8 ? (k == 0 ? 1.0 : 0.0) : raw(i, 6 + k) / nq;
  o[10] = gen ? sig(raw(i, 10)) : 1.0;
  return o;
}

}  // namespace

TEST_CASE("gaussian_generate") {
  const ModelConfig cfg = small_config();
  Fixture fx(7, 300, cfg);
  const B2PModel m = test_model(cfg, 7);
  LevelMaps maps(fx.hier);
  Rng rng(7);
  for (int level : {3, 4}) {
    const Eigen::Index n = static_cast<Eigen::Index>(fx.hier.size(level));
    const Matrix recon = random_matrix(rng, n, 16);
    ad::Tape t(false);
    Network net(t, m, maps);
    const Matrix raw = t.value(net.generate_raw(level, t.constant(recon)));
    const Matrix g = t.value(net.generate(level, t.constant(recon)));
    const bool gen = mode_for(level, cfg.depth) == GenMode::kGenerative;
    CHECK(g.rows() == (gen ? 8 * n : n));
    CHECK(g.cols() == 14);
    const double voxel = std::ldexp(1.0, cfg.depth - level);
    const auto& coords = gen ? maps.children(level) : fx.hier.coords(level);
    const double cell = gen ? voxel / 2 : voxel;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double center[3] = {(coords[i][0] + 0.5) * cell, (coords[i][1] + 0.5) * cell, (coords[i][2] + 0.5) * cell};
      const auto o = oracle_row(raw, i, center, voxel, gen);
      for (int k = 0; k < 14; ++k) worst = std::max(worst, std::abs(o[k] - g(i, k)));
      if (!gen) CHECK(g(i, splat::kColOpacity) == 1.0);
    }
    CHECK(worst <= 1e-12);
  }
  ad::Tape t(false);
  Network net(t, m, maps);
  CHECK_THROWS_AS(net.generate(2, t.constant(Matrix::Zero(static_cast<Eigen::Index>(fx.hier.size(2)), 16))),
                  LevelUnavailableError);
}

TEST_CASE("gaussian activation edge cases") {
  Matrix raw = Matrix::Zero(2, 14);
  raw(1, 3) = 100.0;
  raw(1, 4) = -100.0;
  const Matrix centers = Matrix::Zero(2, 3);
  ad::Tape t(false);
  const Matrix g = t.value(gaussian_activation(t, t.constant(raw), centers, 2.0, GenMode::kGenerative));
  CHECK(g(0, splat::kColQuat) == 1.0);
  CHECK(g(0, splat::kColOpacity) == 0.5);
  CHECK(g(0, splat::kColScale) == 1.0);
  CHECK(g(1, splat::kColScale) == 8.0);
  CHECK(g(1, splat::kColScale + 1) == 1e-4);
  raw(0, 12) = std::nan("");
  CHECK_THROWS_WITH_AS(gaussian_activation(t, t.constant(raw), centers, 2.0, GenMode::kDirect),
                       doctest::Contains("color g"), NumericError);
}

TEST_CASE("encode and decode: prefix, closed loop, errors") {
  const ModelConfig cfg = small_config();
  const B2PModel m = test_model(cfg, 8);
  Rng rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const auto pc = random_cloud(rng, 150 + 100 * trial, cfg.depth);
    const auto full = encode_pipeline(pc, m);
    const auto part = encode_pipeline(pc, m, 3);
    const auto bf = codec::serialize(full.stream), bp = codec::serialize(part.stream);
    REQUIRE(bp.size() < bf.size());
    CHECK(std::equal(bp.begin(), bp.end(), bf.begin()));
    CHECK(full.levels.size() == 3);
    const auto back = codec::deserialize(bf);
    const auto d4 = decode_pipeline(back, m, 4);
    const auto d3 = decode_pipeline(back, m, 3);
    const auto d3p = decode_pipeline(codec::deserialize(bp), m, 3);
    for (int n = 2; n <= 4; ++n) CHECK(d4.recon.at(n) == full.recon.at(n));
    CHECK(splat::to_matrix(d3.gaussians) == splat::to_matrix(d3p.gaussians));
    CHECK(d3.gaussians.size() == 8 * voxel::build_hierarchy(pc, 2).size(3));
    CHECK(d4.gaussians.size() == voxel::build_hierarchy(pc, 2).size(4));
    CHECK_THROWS_AS(decode_pipeline(codec::deserialize(bp), m, 4), LevelUnavailableError);
    CHECK_THROWS_AS(decode_pipeline(back, m, 2), LevelUnavailableError);
    CHECK_THROWS_AS(decode_pipeline(back, B2PModel::initialize(cfg, 99), 4), IncompatibleError);
    auto wrong = back;
    wrong.levels[1].num_points += 1;
    CHECK_THROWS_AS(decode_pipeline(wrong, m, 4), ConsistencyError);
    for (const auto& lr : full.levels) CHECK(lr.symbols == lr.points * 4);
  }
  // A single point.
  const auto one = random_cloud(rng, 1, cfg.depth);
  const auto e1 = encode_pipeline(one, m);
  const auto d1 = decode_pipeline(codec::deserialize(codec::serialize(e1.stream)), m, 4);
  CHECK(d1.gaussians.size() == 1);
  CHECK(d1.recon.at(4) == e1.recon.at(4));
  voxel::PointCloud other = one;
  other.bit_depth = 6;
  CHECK_THROWS_AS(encode_pipeline(other, m), ConfigError);
}

TEST_CASE("every synthetic cloud survives encode and decode") {
  const auto cfg = testing::small_config(8, 4);
  const B2PModel m = B2PModel::initialize(cfg, 21);
  const char* kinds[] = {"sphere", "cube", "union"};
  for (uint64_t seed = 0; seed < 102; ++seed) {
    voxel::SynthParams p;
    p.bit_depth = cfg.depth;
    p.seed = seed;
    p.checker = 2 + static_cast<int>(seed % 7);
    const auto pc = voxel::synth(kinds[seed % 3], p);
    const auto enc = encode_pipeline(pc, m);
    const auto bytes = codec::serialize(enc.stream);
    const auto back = codec::deserialize(bytes);
    for (int lvl = cfg.m_min; lvl <= cfg.m_max; ++lvl) {
      const auto dec = decode_pipeline(back, m, lvl);
      CHECK(dec.recon.at(lvl) == enc.recon.at(lvl));
      CHECK(!dec.gaussians.empty());
    }
  }
}
