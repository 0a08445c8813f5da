#pragma once

#include "b2p/ad/tape.hpp"
#include "b2p/image.hpp"
#include "b2p/splat/camera.hpp"
#include "b2p/splat/rasterizer.hpp"

namespace b2p::ad {

// Sum over all entries of -log2 max(P(bin around x | mu, sigma), 2^-16).
// x, mu and sigma share one shape.
Var rate_bits(Tape& t, Var x, Var mu, Var sigma);

// Images on the tape are (H*W) x 3 matrices, row y*W + x.
Matrix image_to_matrix(const Image& img);
Image matrix_to_image(const Matrix& m, int width, int height);

// Mean absolute error against a fixed target.
Var l1_loss(Tape& t, Var img, const Image& target);
// 1 - mean SSIM against a fixed target.
Var ssim_loss(Tape& t, Var img, const Image& target);

// Renders an N x 14 Gaussian parameter matrix.
Var render(Tape& t, Var gaussians, const splat::Camera& cam, const splat::RasterOptions& opt = {},
           splat::RenderStats* stats = nullptr);

}  // namespace b2p::ad
