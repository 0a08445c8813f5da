#pragma once

#include <vector>

#include "b2p/image.hpp"

namespace b2p::metrics {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// 10 log10(1 / MSE) over all pixels and channels, capped at kPsnrCap.
double psnr(const Image& x, const Image& y);
double mse(const Image& x, const Image& y);

// Normalized 1-D Gaussian of `size` taps centered at (size - 1) / 2.
std::vector<double> gaussian_window(int size, double sigma = kSsimSigma);

// Window edge actually used for an image: 11, or the smaller image side.
int window_size(int width, int height);

// Mean SSIM over valid window positions, per channel then averaged.
double ssim(const Image& x, const Image& y);

// As ssim(); also writes d mean-SSIM / d x into grad_x when given.
double ssim_with_grad(const Image& x, const Image& y, Image* grad_x);

// Luminance and contrast-structure means of one scale, averaged over channels.
struct SsimTerms {
  double ssim = 0.0;
  double cs = 0.0;
};
SsimTerms ssim_terms(const Image& x, const Image& y);

// 2x2 average pooling; odd trailing rows and columns are dropped.
Image downsample2(const Image& x);

// Five-scale MS-SSIM per channel, averaged over channels. Negative
// contrast-structure terms are clamped to 0 before the power.
double ms_ssim(const Image& x, const Image& y);

}  // namespace b2p::metrics
