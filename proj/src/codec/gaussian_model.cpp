#include "b2p/codec/gaussian_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "b2p/error.hpp"

namespace b2p::codec {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_params(double mu, double sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0)) {
    throw NumericError("gaussian model: invalid parameters mu=" + std::to_string(mu) +
                       " sigma=" + std::to_string(sigma));
  }
}

// Standardized bin edges; infinities mark absorbed tails.
struct Edges {
  double za;
  double zb;
};

Edges bin_edges(double x, double mu, double sigma) {
  const double a = x <= kSymbolMin ? -INFINITY : (x - 0.5 - mu) / sigma;
  const double b = x >= kSymbolMax ? INFINITY : (x + 0.5 - mu) / sigma;
  return {a, b};
}

double upper_tail(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }
double lower_tail(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

// Phi(zb) - Phi(za) evaluated on the side that avoids cancellation.
double bin_mass(double za, double zb) {
  if (za >= 0.0) return upper_tail(za) - upper_tail(zb);
  if (zb <= 0.0) return lower_tail(zb) - lower_tail(za);
  return 1.0 - lower_tail(za) - upper_tail(zb);
}

double density(double z) { return std::isfinite(z) ? kInvSqrt2Pi * std::exp(-0.5 * z * z) : 0.0; }
double z_density(double z) { return std::isfinite(z) ? z * density(z) : 0.0; }

}  // namespace

Quantized quantize(double x) {
  if (std::isnan(x)) throw NumericError("quantize: NaN input");
  const double r = std::round(x);
  if (r > kSymbolMax) return {kSymbolMax, true};
  if (r < kSymbolMin) return {kSymbolMin, true};
  return {static_cast<int>(r), false};
}

double gaussian_bin_prob(double x, double mu, double sigma) {
  check_params(mu, sigma);
  if (!std::isfinite(x)) throw NumericError("gaussian model: non-finite symbol");
  const Edges e = bin_edges(x, mu, sigma);
  return bin_mass(e.za, e.zb);
}

BinProbGrad gaussian_bin_prob_grad(double x, double mu, double sigma) {
  check_params(mu, sigma);
  if (!std::isfinite(x)) throw NumericError("gaussian model: non-finite symbol");
  const Edges e = bin_edges(x, mu, sigma);
  BinProbGrad g;
  g.p = bin_mass(e.za, e.zb);
  const double da = density(e.za);
  const double db = density(e.zb);
  g.dx = (db - da) / sigma;
  g.dmu = -g.dx;
  g.dsigma = -(z_density(e.zb) - z_density(e.za)) / sigma;
  return g;
}

double symbol_bits(double p) { return -std::log2(std::max(p, kProbFloor)); }

std::array<double, kNumSymbols> floor_adjusted_pmf(double mu, double sigma) {
  check_params(mu, sigma);
  std::array<double, kNumSymbols> p{};
  for (int k = 0; k < kNumSymbols; ++k) {
    const Edges e = bin_edges(kSymbolMin + k, mu, sigma);
    p[k] = bin_mass(e.za, e.zb);
  }

  std::array<bool, kNumSymbols> pinned{};
  std::array<double, kNumSymbols> share{};
  for (;;) {
    double free_mass = 0.0;
    int pinned_count = 0;
    for (int k = 0; k < kNumSymbols; ++k) {
      if (pinned[k]) {
        ++pinned_count;
      } else {
        free_mass += p[k];
      }
    }
    const double budget = static_cast<double>(kCdfTotal - pinned_count);
    bool changed = false;
    for (int k = 0; k < kNumSymbols; ++k) {
      if (pinned[k]) {
        share[k] = 1.0;
        continue;
      }
      share[k] = free_mass > 0.0 ? p[k] * budget / free_mass : 0.0;
      if (share[k] < 1.0) {
        pinned[k] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (double& s : share) s /= kCdfTotal;
  return share;
}

CdfTable build_cdf_table(double mu, double sigma) {
  const auto share = floor_adjusted_pmf(mu, sigma);
  std::array<uint32_t, kNumSymbols> freq{};
  std::array<double, kNumSymbols> rem{};
  uint32_t used = 0;
  for (int k = 0; k < kNumSymbols; ++k) {
    const double counts = share[k] * kCdfTotal;
    freq[k] = static_cast<uint32_t>(std::floor(counts));
    if (freq[k] < 1) freq[k] = 1;
    rem[k] = counts - std::floor(counts);
    used += freq[k];
  }
  if (used > kCdfTotal) throw ConsistencyError("cdf table: apportionment overflow");
  // Largest remainders first, lower symbol first on ties.
  std::array<int, kNumSymbols> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (uint32_t i = 0; used < kCdfTotal; ++i) {
    ++freq[order[i % kNumSymbols]];
    ++used;
  }
  CdfTable cdf{};
  for (int k = 0; k < kNumSymbols; ++k) cdf[k + 1] = cdf[k] + freq[k];
  return cdf;
}

double estimate_bits(std::span<const int> symbols, std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != symbols.size() || sigma.size() != symbols.size()) {
    throw DimensionError("estimate_bits: parameter count mismatch");
  }
  double bits = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i) bits += symbol_bits(gaussian_bin_prob(symbols[i], mu[i], sigma[i]));
  return bits;
}

}  // namespace b2p::codec
