#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "b2p/image.hpp"
#include "b2p/splat/camera.hpp"
#include "b2p/splat/gaussian.hpp"

namespace b2p::splat {

inline constexpr double kAlphaMax = 0.999;
inline constexpr double kAlphaMin = 1.0 / 255.0;

struct RasterOptions {
  double termination = 1e-4;  // stop a pixel once T drops below this
  int tile = 16;
};

struct RenderStats {
  size_t contributions = 0;  // blended (pixel, Gaussian) pairs
  size_t clamped = 0;        // of those, alpha clamped at kAlphaMax
  size_t regularized = 0;    // Gaussians whose screen covariance got the floor
  size_t culled = 0;         // behind the near plane or fully transparent
  size_t singular = 0;       // skipped for a non-invertible screen covariance
  size_t terminated = 0;     // pixels stopped early
};

// Per-Gaussian screen-space state kept for the backward pass.
struct Splat2D {
  bool active = false;
  Projection proj;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

struct Contribution {
  int32_t slot;          // position in the tile's Gaussian list
  double alpha;          // after clamping
  double transmittance;  // before this Gaussian
};

struct TileRecord {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel bounds, exclusive end
  std::vector<int32_t> gaussians;       // depth order
  std::vector<int32_t> pixel_ptr;       // CSR over the tile's pixels (row-major)
  std::vector<Contribution> contribs;
};

struct RenderAux {
  std::vector<Splat2D> splats;
  std::vector<TileRecord> tiles;
  std::vector<double> final_transmittance;  // per pixel
  RenderStats stats;
};

// Alpha-blended front-to-back rendering on a black background.
Image rasterize(std::span<const Gaussian3D> gaussians, const Camera& cam, const RasterOptions& opt = {},
                RenderAux* aux = nullptr);

// Gradient of the loss w.r.t. every Gaussian parameter (rows in
// kGaussianParams layout) given dL/dImage and the aux of the forward pass.
Matrix rasterize_backward(std::span<const Gaussian3D> gaussians, const Camera& cam, const RenderAux& aux,
                          const Image& grad_image);

// Per-pixel reference renderer: every Gaussian visits every pixel in depth
// order, no tiles, no early termination.
Image brute_force_render(std::span<const Gaussian3D> gaussians, const Camera& cam);

}  // namespace b2p::splat
