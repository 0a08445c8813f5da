#pragma once

#include <span>

#include "b2p/ad/tape.hpp"
#include "b2p/sparse/kernel_map.hpp"

namespace b2p::ad {

// Kernel maps and index spans passed to these ops must outlive backward().
// An invalid bias Var means no bias; biases are 1 x C_out.

Var conv(Tape& t, Var x, const sparse::KernelMap& km, Var w, Var b);
Var geom_conv(Tape& t, Var x, const sparse::KernelMap& km, Var w, Var b);
Var transposed(Tape& t, Var x, Var w, Var b);
Var linear(Tape& t, Var x, Var w, Var b);

Var relu(Tape& t, Var x);
Var exp(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var tanh(Tape& t, Var x);
// Gradient passes only where lo < x < hi.
Var clamp(Tape& t, Var x, double lo, double hi);

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);

Var concat_cols(Tape& t, Var a, Var b);
Var slice_cols(Tape& t, Var x, Eigen::Index begin, Eigen::Index count);

// Mean of each parent's children / copy of each child's parent row.
Var pool(Tape& t, Var x, std::span<const int32_t> child_offsets);
Var upsample(Tape& t, Var x, std::span<const int32_t> parents);

Var sum(Tape& t, Var x);
Var mean(Tape& t, Var x);

struct ConvVars {
  Var w, b;
};
struct InceptionVars {
  ConvVars a1, a2, b1, b2, b3;
};
struct ResVars {
  ConvVars c1, c2;
};

// Same computations, in the same order, as sparse::inception_res_block and
// sparse::res_block.
Var inception_block(Tape& t, Var x, const sparse::KernelMap& km, const InceptionVars& p, bool geom);
Var res_block(Tape& t, Var x, const sparse::KernelMap& km, const ResVars& p, bool geom);

}  // namespace b2p::ad
