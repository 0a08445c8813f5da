#include <bit>
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "naive.hpp"

#include "b2p/codec/bitstream.hpp"
#include "b2p/codec/gaussian_model.hpp"
#include "b2p/codec/geometry.hpp"
#include "b2p/codec/range_coder.hpp"
#include "b2p/error.hpp"
#include "b2p/voxel/hierarchy.hpp"
#include "b2p/voxel/point_cloud.hpp"

using namespace b2p;
using namespace b2p::codec;

namespace {

// Reference values from 30-digit erf evaluation.
constexpr double kP00 = 0.382924922548026207;
constexpr double kP10 = 0.241730337457128830;
constexpr double kBits00 = 1.38486653429098968;

struct Draw {
  std::vector<int> symbols;
  std::vector<double> mu, sigma;
};

Draw draw_symbols(Rng& rng, size_t n, double log_sigma_lo, double log_sigma_hi) {
  Draw d;
  for (size_t i = 0; i < n; ++i) {
    const double mu = rng.uniform(-20.0, 20.0);
    const double sigma = std::exp(rng.uniform(log_sigma_lo, log_sigma_hi));
    d.mu.push_back(mu);
    d.sigma.push_back(sigma);
    d.symbols.push_back(quantize(mu + sigma * rng.normal()).value);
  }
  return d;
}

}  // namespace

TEST_CASE("quantize") {
  CHECK(quantize(0.4).value == 0);
  CHECK(quantize(0.5).value == 1);
  CHECK(quantize(-0.5).value == -1);
  CHECK(quantize(-1.49).value == -1);
  CHECK_FALSE(quantize(126.6).clamped);
  const auto big = quantize(300.0);
  CHECK(big.value == 127);
  CHECK(big.clamped);
  CHECK(quantize(-1e9).value == -127);
  CHECK_THROWS_AS(quantize(NAN), NumericError);
}

TEST_CASE("gaussian_bin_prob") {
  CHECK(gaussian_bin_prob(0, 0, 1) == doctest::Approx(kP00).epsilon(1e-14));
  CHECK(gaussian_bin_prob(1, 0, 1) == doctest::Approx(kP10).epsilon(1e-14));
  CHECK(symbol_bits(gaussian_bin_prob(0, 0, 1)) == doctest::Approx(kBits00).epsilon(1e-13));
  CHECK(symbol_bits(0.5) == 1.0);
  CHECK(symbol_bits(0.0) == 16.0);
  CHECK(symbol_bits(gaussian_bin_prob(3, 3, kSigmaMin)) < 1e-12);
  CHECK(gaussian_bin_prob(127, 300, 1) == 1.0);
  CHECK(gaussian_bin_prob(-127, -300, 1) == 1.0);
  CHECK_THROWS_AS(gaussian_bin_prob(0, 0, 0), NumericError);
  CHECK_THROWS_AS(gaussian_bin_prob(0, NAN, 1), NumericError);

  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const double mu = rng.uniform(-150, 150), sigma = std::exp(rng.uniform(std::log(kSigmaMin), std::log(kSigmaMax)));
    double sum = 0;
    for (int x = kSymbolMin; x <= kSymbolMax; ++x) sum += gaussian_bin_prob(x, mu, sigma);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    // integer shift invariance away from the edges
    const int x = static_cast<int>(rng.below(21)) - 10;
    const double m = rng.uniform(-5, 5);
    CHECK(gaussian_bin_prob(x, m, sigma) == doctest::Approx(gaussian_bin_prob(x + 7, m + 7, sigma)).epsilon(1e-9));
  }
}

TEST_CASE("gaussian_bin_prob_grad matches finite differences") {
  Rng rng(4);
  const double h = 1e-5;
  for (int t = 0; t < 200; ++t) {
    const double x = rng.uniform(-6, 6), mu = rng.uniform(-4, 4), sigma = std::exp(rng.uniform(-1, 2));
    const auto g = gaussian_bin_prob_grad(x, mu, sigma);
    CHECK(g.p == gaussian_bin_prob(x, mu, sigma));
    const double dx = (gaussian_bin_prob(x + h, mu, sigma) - gaussian_bin_prob(x - h, mu, sigma)) / (2 * h);
    const double dm = (gaussian_bin_prob(x, mu + h, sigma) - gaussian_bin_prob(x, mu - h, sigma)) / (2 * h);
    const double ds = (gaussian_bin_prob(x, mu, sigma + h) - gaussian_bin_prob(x, mu, sigma - h)) / (2 * h);
    CHECK(std::abs(g.dx - dx) <= 1e-7 * (1 + std::abs(dx)));
    CHECK(std::abs(g.dmu - dm) <= 1e-7 * (1 + std::abs(dm)));
    CHECK(std::abs(g.dsigma - ds) <= 1e-7 * (1 + std::abs(ds)));
  }
  const auto edge = gaussian_bin_prob_grad(127, 126.0, 1.0);
  CHECK(edge.dx == doctest::Approx(-std::exp(-0.125) / std::sqrt(2 * M_PI)));
}

TEST_CASE("build_cdf_table") {
  const auto sharp = build_cdf_table(0.0, kSigmaMin);
  CHECK(sharp[0] == 0);
  CHECK(sharp[kNumSymbols] == kCdfTotal);
  for (int k = 0; k < kNumSymbols; ++k) {
    const uint32_t f = sharp[k + 1] - sharp[k];
    if (k == -kSymbolMin) {
      CHECK(f == kCdfTotal - (kNumSymbols - 1));
    } else {
      CHECK(f == 1);
    }
  }

  Rng rng(5);
  size_t raw_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    const double mu = rng.uniform(-140, 140), sigma = std::exp(rng.uniform(std::log(kSigmaMin), std::log(kSigmaMax)));
    const auto cdf = build_cdf_table(mu, sigma);
    CHECK(cdf[0] == 0);
    CHECK(cdf[kNumSymbols] == kCdfTotal);
    const auto adjusted = floor_adjusted_pmf(mu, sigma);
    double pinned = 0.0, worst_adj = 0.0, worst_raw = 0.0;
    for (int k = 0; k < kNumSymbols; ++k) {
      const uint32_t f = cdf[k + 1] - cdf[k];
      REQUIRE(f >= 1);
      const double q = static_cast<double>(f) / kCdfTotal;
      const double p = gaussian_bin_prob(kSymbolMin + k, mu, sigma);
      worst_adj = std::max(worst_adj, std::abs(q - adjusted[k]));
      worst_raw = std::max(worst_raw, std::abs(q - p));
      if (p * kCdfTotal < 1.0) pinned += 1.0 / kCdfTotal;
    }
    CHECK(worst_adj <= std::ldexp(1.0, -15));
    // Raw deviation is bounded by the floor mass moved onto pinned symbols.
    CHECK(worst_raw <= std::ldexp(1.0, -15) + pinned);
    if (worst_raw <= std::ldexp(1.0, -15)) ++raw_ok;
    CHECK(build_cdf_table(mu, sigma) == cdf);
  }
  CHECK(raw_ok > 0);
}

TEST_CASE("range coder round trip and length") {
  Rng rng(6);
  const auto d = draw_symbols(rng, 100000, std::log(0.3), std::log(40.0));
  std::vector<CdfTable> cdfs;
  cdfs.reserve(d.symbols.size());
  for (size_t i = 0; i < d.symbols.size(); ++i) cdfs.push_back(build_cdf_table(d.mu[i], d.sigma[i]));
  const auto bytes = range_encode(d.symbols, cdfs);
  CHECK(range_decode(bytes, cdfs) == d.symbols);
  const double model_bits = table_bits(d.symbols, cdfs);
  const double payload_bits = 8.0 * bytes.size();
  CHECK(payload_bits <= model_bits * 1.001 + 32);
  CHECK(payload_bits >= model_bits - 32);
  // The integer tables cost extra against the raw Gaussian because every
  // symbol keeps one count; the excess is small only for wide sigma.
  const double est = estimate_bits(d.symbols, d.mu, d.sigma);
  CHECK(payload_bits > est);
  CHECK(payload_bits - est <= 0.004 * est + 32);

  Rng wide_rng(16);
  const auto w = draw_symbols(wide_rng, 20000, std::log(30.0), std::log(100.0));
  std::vector<CdfTable> wide;
  for (size_t i = 0; i < w.symbols.size(); ++i) wide.push_back(build_cdf_table(w.mu[i], w.sigma[i]));
  const double wide_payload = 8.0 * range_encode(w.symbols, wide).size();
  const double wide_est = estimate_bits(w.symbols, w.mu, w.sigma);
  CHECK(std::abs(wide_payload - wide_est) <= 0.001 * wide_est + 32);

  // Low-entropy symbols: the coder still tracks its own tables.
  Rng sharp_rng(17);
  const auto sh = draw_symbols(sharp_rng, 100000, std::log(kSigmaMin), std::log(0.05));
  std::vector<CdfTable> sharp;
  for (size_t i = 0; i < sh.symbols.size(); ++i) sharp.push_back(build_cdf_table(sh.mu[i], sh.sigma[i]));
  const auto sharp_bytes = range_encode(sh.symbols, sharp);
  CHECK(range_decode(sharp_bytes, sharp) == sh.symbols);
  CHECK(8.0 * sharp_bytes.size() <= table_bits(sh.symbols, sharp) * 1.001 + 32);

  // Deterministic output.
  CHECK(range_encode(d.symbols, cdfs) == bytes);
  CHECK(range_encode(std::vector<int>{}, std::vector<CdfTable>{}).size() == 4);
  auto corrupt = bytes;
  for (size_t i = 0; i < 64; ++i) corrupt[i] = 0xFF;
  bool caught = false;
  try {
    caught = range_decode(corrupt, cdfs) != d.symbols;
  } catch (const FormatError&) {
    caught = true;
  }
  CHECK(caught);
}

TEST_CASE("range coder on equiprobable binary symbols") {
  CdfTable coin{};
  for (int k = 0; k < kNumSymbols; ++k) coin[k + 1] = coin[k] + (k == -kSymbolMin || k == 1 - kSymbolMin ? kCdfTotal / 2 : 0);
  Rng rng(7);
  for (int t = 0; t < 64; ++t) {
    std::vector<int> s(8);
    for (int& v : s) v = static_cast<int>(rng.below(2));
    std::vector<CdfTable> cdfs(8, coin);
    const auto bytes = range_encode(s, cdfs);
    CHECK(bytes.size() <= 5);
    CHECK(range_decode(bytes, cdfs) == s);
  }
}

TEST_CASE("range coder carries and extreme tables") {
  // Long runs of the most probable top symbol push low toward a carry.
  Rng rng(8);
  std::vector<int> s;
  std::vector<CdfTable> cdfs;
  for (int i = 0; i < 20000; ++i) {
    const double mu = (i % 3 == 0) ? 127.0 : rng.uniform(-127, 127);
    const double sigma = (i % 5 == 0) ? kSigmaMin : std::exp(rng.uniform(-4, 5));
    cdfs.push_back(build_cdf_table(mu, sigma));
    s.push_back(i % 7 == 0 ? static_cast<int>(rng.below(255)) - 127 : quantize(mu + sigma * rng.normal()).value);
  }
  CHECK(range_decode(range_encode(s, cdfs), cdfs) == s);
  CHECK_THROWS_AS(range_encode(std::vector<int>{200}, std::vector<CdfTable>{cdfs[0]}), RangeError);
}

TEST_CASE("estimate_bits") {
  std::vector<int> s{0, 5};
  std::vector<double> mu{0.0, 5.0}, sigma{1.0, kSigmaMin};
  CHECK(estimate_bits(s, mu, sigma) == doctest::Approx(kBits00).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_bits(s, std::vector<double>{0.0}, sigma), DimensionError);
}

namespace {

LayeredBitstream random_stream(Rng& rng) {
  LayeredBitstream s;
  s.header.depth = 10;
  s.header.base_level = 7;
  s.header.m_max = 9;
  s.header.channels = 8;
  s.header.model_hash = rng.next_u64();
  s.header.original_points = static_cast<uint32_t>(rng.below(1u << 30));
  s.geometry.resize(rng.below(200) + 1);
  for (auto& b : s.geometry) b = static_cast<uint8_t>(rng.below(256));
  const int n = static_cast<int>(rng.below(4));
  for (int l = 0; l < n; ++l) {
    LevelChunk c{7 + l, static_cast<uint32_t>(rng.below(100000)), {}};
    c.payload.resize(rng.below(300));
    for (auto& b : c.payload) b = static_cast<uint8_t>(rng.below(256));
    s.levels.push_back(std::move(c));
  }
  return s;
}

bool same(const LayeredBitstream& a, const LayeredBitstream& b) {
  if (a.levels.size() != b.levels.size()) return false;
  for (size_t i = 0; i < a.levels.size(); ++i)
    if (a.levels[i].level != b.levels[i].level || a.levels[i].num_points != b.levels[i].num_points ||
        a.levels[i].payload != b.levels[i].payload)
      return false;
  const auto& x = a.header;
  const auto& y = b.header;
  return x.version == y.version && x.depth == y.depth && x.base_level == y.base_level && x.m_max == y.m_max &&
         x.channels == y.channels && x.model_hash == y.model_hash && x.original_points == y.original_points &&
         a.geometry == b.geometry;
}

}  // namespace

TEST_CASE("bitstream header layout") {
  LayeredBitstream s;
  s.header = {1, 10, 7, 9, 8, 0x0102030405060708ull, 0xA0B0C0D0u};
  const auto bytes = serialize(s);
  REQUIRE(bytes.size() == kHeaderBytes + kGeometryChunkOverhead);
  const std::vector<uint8_t> head(bytes.begin(), bytes.begin() + kHeaderBytes);
  const std::vector<uint8_t> expect{'B', '2', 'P', '1', 1, 0, 10, 7, 9, 8, 0, 0, 8, 7, 6, 5, 4, 3, 2, 1,
                                    0xD0, 0xC0, 0xB0, 0xA0};
  CHECK(head == expect);
}

TEST_CASE("bitstream round trip, prefix and truncation") {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_stream(rng);
    const auto bytes = serialize(s);
    const auto back = deserialize(bytes);
    CHECK(same(back, s));
    CHECK(serialize(back) == bytes);
    size_t total = kHeaderBytes + back.geometry_bytes();
    for (int n = 7; n <= back.top_level(); ++n) total += back.level_bytes(n);
    CHECK(total == bytes.size());

    if (!s.levels.empty()) {
      const size_t cut = bytes.size() - kLevelChunkOverhead - s.levels.back().payload.size();
      const auto pre = deserialize(std::span(bytes).first(cut));
      CHECK(pre.top_level() == s.top_level() - 1);
      CHECK(pre.header.m_max == 9);
      CHECK_THROWS_AS(pre.level(s.top_level()), LevelUnavailableError);
      // Any cut inside the last chunk names its level.
      const size_t inside = cut + 1 + rng.below(bytes.size() - cut - 1);
      try {
        deserialize(std::span(bytes).first(inside));
        FAIL("expected truncation");
      } catch (const TruncationError& e) {
        CHECK(e.level() == s.top_level());
      }
      auto bad = bytes;
      bad.back() ^= 0x40;
      if (!s.levels.back().payload.empty()) CHECK_THROWS_AS(deserialize(bad), ChecksumError);
    }
  }
  auto bytes = serialize(random_stream(rng));
  CHECK_THROWS_AS(deserialize(std::span(bytes).first(kHeaderBytes + 3)), TruncationError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
  bytes[0] = 'B';
  bytes[4] = 2;
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
}

TEST_CASE("geometry occupancy") {
  const std::vector<Coord> one{{5, 2, 7}};
  const auto g1 = encode_geometry(one, 3);
  REQUIRE(g1.size() == 3);
  for (uint8_t b : g1) CHECK(std::popcount(static_cast<unsigned>(b)) == 1);
  CHECK(decode_geometry_points(g1, 3) == one);

  std::vector<Coord> cube;
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) cube.push_back({x, y, z});
  std::vector<Vec3> cols(cube.size(), Vec3{0, 0, 0});
  cube = voxel::canonicalize(cube, cols, 2).points;
  const auto gc = encode_geometry(cube, 2);
  CHECK(gc == std::vector<uint8_t>(9, 0xFF));
  CHECK(decode_geometry_points(gc, 2) == cube);

  Rng rng(10);
  for (int t = 0; t < 20; ++t) {
    const int depth = 3 + static_cast<int>(rng.below(6));
    auto pts = b2p::testing::random_coords(rng, 1 + rng.below(400), 1 << depth);
    std::vector<Vec3> c(pts.size(), Vec3{0.5, 0.5, 0.5});
    const auto pc = voxel::canonicalize(pts, c, depth);
    const auto bytes = encode_geometry(pc.points, depth);
    CHECK(decode_geometry_points(bytes, depth) == pc.points);
    const auto hier = decode_geometry(bytes, depth, 1);
    const auto ref = voxel::build_hierarchy(pc, 1);
    for (int n = 1; n <= depth; ++n) CHECK(hier.coords(n) == ref.coords(n));
    CHECK_THROWS_AS(decode_geometry_points(std::span(bytes).first(bytes.size() - 1), depth), FormatError);
    auto extra = bytes;
    extra.push_back(1);
    CHECK_THROWS_AS(decode_geometry_points(extra, depth), FormatError);
  }
}
