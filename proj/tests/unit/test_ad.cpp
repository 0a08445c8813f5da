#include <cmath>

#include "doctest.h"
#include "grad_cases.hpp"
#include "naive.hpp"

#include "b2p/ad/losses.hpp"
#include "b2p/ad/ops.hpp"
#include "b2p/codec/gaussian_model.hpp"
#include "b2p/error.hpp"
#include "b2p/metrics/image_metrics.hpp"
#include "b2p/sparse/blocks.hpp"
#include "b2p/train/adam.hpp"

using namespace b2p;
using namespace b2p::testing;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

void check_case(const GradCase& c, int probes) {
  INFO(c.name << ": worst " << c.report.worst << ", kinks skipped " << c.report.kinks);
  CHECK(c.report.probes == probes);
  CHECK(c.report.worst <= c.tolerance);
}

ad::ConvVars const_conv(ad::Tape& t, const sparse::ConvParams& p) {
  return {t.constant(p.weights), p.bias ? t.constant(Matrix(*p.bias)) : ad::Var{}};
}

sparse::ConvParams rand_conv(Rng& rng, int rows, int cout) {
  return {random_matrix(rng, rows, cout, 1.0 / std::sqrt(rows)), random_row(rng, cout, 0.1)};
}

}  // namespace

TEST_CASE("relu backward examples") {
  for (auto [x, expect] : {std::pair{2.0, 1.0}, std::pair{-1.0, 0.0}}) {
    ad::Tape t;
    const ad::Var v = t.leaf(scalar(x));
    t.backward(ad::relu(t, v));
    CHECK(t.grad(v)(0, 0) == expect);
  }
}

TEST_CASE("backward contract") {
  ad::Tape t;
  const ad::Var v = t.leaf(Matrix::Ones(2, 2));
  const ad::Var y = ad::relu(t, v);
  CHECK_THROWS_AS(t.backward(y), ContractError);
  ad::Tape t2;
  const ad::Var s = ad::sum(t2, t2.leaf(Matrix::Ones(2, 2)));
  t2.backward(s);
  CHECK_THROWS_AS(t2.backward(s), ContractError);
}

TEST_CASE("unreachable parameters get zero gradients") {
  sparse::ParamStore store;
  store.add("used", {2}, Matrix::Constant(1, 2, 3.0));
  store.add("unused", {3}, Matrix::Constant(1, 3, 1.0));
  ad::Tape t;
  const ad::Var loss = ad::sum(t, ad::scale(t, t.param(store, "used"), 2.0));
  t.backward(loss);
  const auto g = t.param_grads(store);
  CHECK(g[0] == Matrix::Constant(1, 2, 2.0));
  CHECK(g[1] == Matrix::Zero(1, 3));
  CHECK(t.param(store, "used").id == t.param(store, size_t{0}).id);
}

TEST_CASE("inference tape records no closures and no gradients") {
  ad::Tape t(false);
  const ad::Var v = t.leaf(scalar(1.0));
  CHECK_FALSE(t.requires_grad(v));
  const ad::Var y = ad::exp(t, v);
  CHECK(t.value(y)(0, 0) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("taped blocks equal the plain blocks bitwise") {
  Rng rng(11);
  auto h = small_hierarchy(rng, 200);
  const auto km = sparse::build_kernel_map(h->coords(4), h->coords(4), 3);
  const voxel::SparseTensor x{4, h->coords(4), random_matrix(rng, static_cast<Eigen::Index>(h->size(4)), 16)};
  const sparse::InceptionParams ip{rand_conv(rng, 27 * 16, 4), rand_conv(rng, 27 * 4, 8), rand_conv(rng, 27 * 16, 4),
                                   rand_conv(rng, 4, 4), rand_conv(rng, 27 * 4, 8)};
  const sparse::ResParams rp{rand_conv(rng, 27 * 16, 16), rand_conv(rng, 27 * 16, 16)};
  for (bool geom : {false, true}) {
    for (bool record : {false, true}) {
      ad::Tape t(record);
      const ad::Var xv = record ? t.leaf(x.feats) : t.constant(x.feats);
      const ad::InceptionVars iv{const_conv(t, ip.a1), const_conv(t, ip.a2), const_conv(t, ip.b1),
                                 const_conv(t, ip.b2), const_conv(t, ip.b3)};
      const ad::Var yi = ad::inception_block(t, xv, km, iv, geom);
      const ad::Var yr = ad::res_block(t, xv, km, {const_conv(t, rp.c1), const_conv(t, rp.c2)}, geom);
      CHECK(t.value(yi) == sparse::inception_res_block(x, km, ip, geom).feats);
      CHECK(t.value(yr) == sparse::res_block(x, km, rp, geom).feats);
    }
  }
}

TEST_CASE("finite-difference gradients of every primitive") {
  Rng rng(2024);
  const int probes = 24;
  check_case(conv_case(rng, false, probes), probes);
  check_case(conv_case(rng, true, probes), probes);
  check_case(transposed_case(rng, probes), probes);
  check_case(linear_case(rng, probes), probes);
  for (int rep = 0; rep < 3; ++rep) check_case(composition_case(rng, probes), probes);
  check_case(block_case(rng, true, false, probes), probes);
  check_case(block_case(rng, true, true, probes), probes);
  check_case(block_case(rng, false, false, probes), probes);
  check_case(block_case(rng, false, true, probes), probes);
  check_case(rate_case(rng, probes), probes);
  check_case(ssim_case(rng, probes), probes);
  check_case(l1_case(rng, probes), probes);
  check_case(render_case(rng, probes), probes);
}

TEST_CASE("finite-difference gradients of the network modules") {
  Rng rng(77);
  const int probes = 16;
  check_case(module_case(rng, "convert", 5, probes), probes);
  check_case(module_case(rng, "convert", 4, probes), probes);
  check_case(module_case(rng, "squeeze", 4, probes), probes);
  check_case(module_case(rng, "entropy", 3, probes), probes);
  check_case(module_case(rng, "reconstruct", 4, probes), probes);
  check_case(module_case(rng, "generate", 3, probes), probes);
  check_case(module_case(rng, "generate", 4, probes), probes);
}

TEST_CASE("rate_bits examples") {
  auto bits = [](double x, double mu, double sigma) {
    ad::Tape t(false);
    return t.value(ad::rate_bits(t, t.constant(scalar(x)), t.constant(scalar(mu)), t.constant(scalar(sigma))))(0, 0);
  };
  CHECK(bits(0, 0, 1) == doctest::Approx(1.38486653429098968).epsilon(1e-12));
  CHECK(bits(3, 3, codec::kSigmaMin) < 1e-9);
  CHECK(bits(40, 0, codec::kSigmaMin) == doctest::Approx(16.0));
  // Bin [0.5, inf) at mu = 0.5 holds exactly half the mass.
  CHECK(bits(127, 126.5, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-20, 20), mu = rng.uniform(-20, 20), s = rng.uniform(0.05, 30);
    const double k = static_cast<double>(static_cast<int>(rng.below(41)) - 20);
    CHECK(bits(x + k, mu + k, s) == doctest::Approx(bits(x, mu, s)).epsilon(1e-9));
  }
}

TEST_CASE("rate_bits agrees with estimate_bits") {
  Rng rng(9);
  std::vector<int> sym;
  std::vector<double> mu, sigma;
  Matrix xm(50, 8), mm(50, 8), sm(50, 8);
  for (Eigen::Index i = 0; i < xm.size(); ++i) {
    mu.push_back(rng.uniform(-5, 5));
    sigma.push_back(rng.uniform(0.01, 10));
    sym.push_back(codec::quantize(mu.back() + sigma.back() * rng.normal()).value);
    xm.data()[i] = sym.back();
    mm.data()[i] = mu.back();
    sm.data()[i] = sigma.back();
  }
  ad::Tape t(false);
  const double r = t.value(ad::rate_bits(t, t.constant(xm), t.constant(mm), t.constant(sm)))(0, 0);
  CHECK(std::abs(r - codec::estimate_bits(sym, mu, sigma)) <= 1e-9);
  mm(0, 0) = std::nan("");
  CHECK_THROWS_AS(ad::rate_bits(t, t.constant(xm), t.constant(mm), t.constant(sm)), NumericError);
}

TEST_CASE("image loss examples") {
  Image zero(16, 16, 0.0), one(16, 16, 1.0);
  ad::Tape t(false);
  const ad::Var z = t.constant(ad::image_to_matrix(zero));
  CHECK(t.value(ad::l1_loss(t, z, zero))(0, 0) == 0.0);
  CHECK(t.value(ad::l1_loss(t, z, one))(0, 0) == 1.0);
  CHECK(t.value(ad::ssim_loss(t, z, zero))(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const double c1 = metrics::kSsimC1;
  CHECK(t.value(ad::ssim_loss(t, z, one))(0, 0) == doctest::Approx(1.0 - c1 / (1.0 + c1)).epsilon(1e-12));

  Rng rng(3);
  Image a(9, 7), b(9, 7);
  for (double& v : a.data) v = rng.uniform();
  for (double& v : b.data) v = rng.uniform();
  double oracle = 0.0;
  for (size_t i = 0; i < a.size(); ++i) oracle += std::abs(a.data[i] - b.data[i]);
  oracle /= static_cast<double>(a.size());
  CHECK(std::abs(t.value(ad::l1_loss(t, t.constant(ad::image_to_matrix(a)), b))(0, 0) - oracle) <= 1e-12);
  CHECK_THROWS_AS(ad::l1_loss(t, z, a), DimensionError);
}

TEST_CASE("adam examples") {
  sparse::ParamStore store;
  store.add("theta", {1}, scalar(1.0));
  train::AdamConfig cfg;
  cfg.lr = 1e-3;
  auto state = train::adam_init(store);
  train::adam_step(store, {scalar(0.0)}, state, cfg);
  CHECK(store.value(0)(0, 0) == 1.0);

  sparse::ParamStore s2;
  s2.add("theta", {1}, scalar(0.0));
  auto st2 = train::adam_init(s2);
  train::adam_step(s2, {scalar(1.0)}, st2, cfg);
  CHECK(s2.value(0)(0, 0) == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

  sparse::ParamStore s3;
  s3.add("theta", {1}, scalar(1.0));
  auto st3 = train::adam_init(s3);
  cfg.lr = 1e-2;
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double th = s3.value(0)(0, 0);
    train::adam_step(s3, {scalar(2.0 * th)}, st3, cfg);
    const double now = std::abs(s3.value(0)(0, 0));
    CHECK(now < prev);
    prev = now;
  }
}
