#pragma once

#include <optional>

#include "b2p/common.hpp"
#include "b2p/sparse/kernel_map.hpp"
#include "b2p/voxel/sparse_tensor.hpp"

namespace b2p::sparse {

// Floor of the geometry-invariant denominator.
inline constexpr double kGeomEps = 1e-12;

// Weights are stored as a (num_offsets * c_in) x c_out matrix; rows
// [i*c_in, (i+1)*c_in) hold the c_in x c_out block of offset i.
struct ConvParams {
  Matrix weights;
  std::optional<RowVector> bias;

  Eigen::Index in_channels(int offsets) const { return weights.rows() / offsets; }
  Eigen::Index out_channels() const { return weights.cols(); }
};

// ---- row-matrix kernels (shared with the differentiable ops) --------------

void check_conv_shapes(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias);

// Plain sparse convolution: out_u = sum_i W_i x_{u+i} (+ bias).
Matrix conv_forward(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias);

// Accumulates (+=) into the non-null gradients.
void conv_backward(const Matrix& x, const KernelMap& km, const Matrix& w, const Matrix& grad_out, Matrix* grad_x,
                   Matrix* grad_w, RowVector* grad_bias);

// Sum of squared active weights per output row and channel.
Matrix active_weight_sq(const KernelMap& km, const Matrix& w, Eigen::Index in_channels);

struct GeomConvSaved {
  Matrix normalized;  // output before bias
  Matrix sq;          // active squared-weight sums
};

// Geometry-invariant convolution: each output channel is divided by the
// norm of the weights whose taps land on occupied inputs.
Matrix geom_conv_forward(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias,
                         GeomConvSaved* saved = nullptr);

void geom_conv_backward(const Matrix& x, const KernelMap& km, const Matrix& w, const GeomConvSaved& saved,
                        const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w, RowVector* grad_bias);

// Generative 2x2x2 transposed convolution; output row 8*p + d is child d
// (Morton order) of parent p.
Matrix transposed_forward(const Matrix& x, const Matrix& w, const RowVector* bias);
void transposed_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w,
                         RowVector* grad_bias);

Matrix linear_forward(const Matrix& x, const Matrix& w, const RowVector* bias);
void linear_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w,
                     RowVector* grad_bias);

// Children {2u + d : d in {0,1}^3} of every coordinate, in output-row order.
std::vector<Coord> child_coords(std::span<const Coord> parents);

// ---- SparseTensor-level operations ----------------------------------------

voxel::SparseTensor sparse_conv(const voxel::SparseTensor& x, const KernelMap& km, const ConvParams& p);
voxel::SparseTensor geom_invariant_conv(const voxel::SparseTensor& x, const KernelMap& km, const ConvParams& p);
voxel::SparseTensor transposed_conv_gen(const voxel::SparseTensor& x, const ConvParams& p);
voxel::SparseTensor pointwise_linear(const voxel::SparseTensor& x, const ConvParams& p);

}  // namespace b2p::sparse
