#pragma once

#include "b2p/sparse/conv.hpp"

namespace b2p::sparse {

// Two-branch inception residual block on C channels:
//   a: 3x3 C->C/4, ReLU, 3x3 C/4->C/2, ReLU
//   b: 3x3 C->C/4, ReLU, 1x1 C/4->C/4, ReLU, 3x3 C/4->C/2, ReLU
//   out = ReLU(x + concat(a, b))
struct InceptionParams {
  ConvParams a1, a2, b1, b2, b3;  // b2 is the per-point (1x1) layer
};

// Two 3x3 C->C convs: out = ReLU(x + ReLU(conv2(ReLU(conv1(x))))).
struct ResParams {
  ConvParams c1, c2;
};

// km must be the same-level K=3 map of x's coordinates. Throws ConfigError
// if C is not divisible by 4.
voxel::SparseTensor inception_res_block(const voxel::SparseTensor& x, const KernelMap& km,
                                        const InceptionParams& p, bool geom_invariant);

voxel::SparseTensor res_block(const voxel::SparseTensor& x, const KernelMap& km, const ResParams& p,
                              bool geom_invariant);

}  // namespace b2p::sparse
