#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace b2p::codec {

inline constexpr int kSymbolMin = -127;
inline constexpr int kSymbolMax = 127;
inline constexpr int kNumSymbols = kSymbolMax - kSymbolMin + 1;
inline constexpr double kSigmaMin = 1e-2;
inline constexpr double kSigmaMax = 256.0;
inline constexpr int kCdfBits = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfBits;
inline constexpr double kProbFloor = 1.0 / kCdfTotal;

struct Quantized {
  int value = 0;
  bool clamped = false;
};

// Round half away from zero, then clamp to [kSymbolMin, kSymbolMax].
Quantized quantize(double x);

// Probability of the unit bin around x under N(mu, sigma^2). Bins at or
// beyond the alphabet edges absorb the open tails, so the integer bins
// kSymbolMin..kSymbolMax sum to one. x may be real (noisy training values).
double gaussian_bin_prob(double x, double mu, double sigma);

struct BinProbGrad {
  double p = 0.0;
  double dx = 0.0;
  double dmu = 0.0;
  double dsigma = 0.0;
};
BinProbGrad gaussian_bin_prob_grad(double x, double mu, double sigma);

// -log2(max(p, kProbFloor)).
double symbol_bits(double p);

// cdf[k] is the cumulative frequency below symbol kSymbolMin + k;
// cdf[0] == 0, cdf[kNumSymbols] == kCdfTotal, and every symbol has
// frequency >= 1.
using CdfTable = std::array<uint32_t, kNumSymbols + 1>;

CdfTable build_cdf_table(double mu, double sigma);

// Per-symbol probabilities the table apportions before integer rounding:
// symbols whose share would fall below one count are pinned to one count
// and the rest of the mass is rescaled over the remaining symbols.
std::array<double, kNumSymbols> floor_adjusted_pmf(double mu, double sigma);

// Sum of symbol_bits(gaussian_bin_prob) over all symbols; mu and sigma are
// row-aligned with symbols.
double estimate_bits(std::span<const int> symbols, std::span<const double> mu, std::span<const double> sigma);

}  // namespace b2p::codec
