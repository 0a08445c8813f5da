#include "b2p/sparse/blocks.hpp"

#include <string>

#include "b2p/error.hpp"

namespace b2p::sparse {
namespace {

const RowVector* bias_of(const ConvParams& p) { return p.bias ? &*p.bias : nullptr; }

Matrix conv3(const Matrix& x, const KernelMap& km, const ConvParams& p, bool geom) {
  return geom ? geom_conv_forward(x, km, p.weights, bias_of(p)) : conv_forward(x, km, p.weights, bias_of(p));
}

Matrix relu(Matrix m) { return m.cwiseMax(0.0); }

}  // namespace

voxel::SparseTensor inception_res_block(const voxel::SparseTensor& x, const KernelMap& km,
                                        const InceptionParams& p, bool geom_invariant) {
  const Eigen::Index c = x.channels();
  if (c % 4 != 0) throw ConfigError("inception block: channel count " + std::to_string(c) + " not divisible by 4");
  const Matrix a = relu(conv3(relu(conv3(x.feats, km, p.a1, geom_invariant)), km, p.a2, geom_invariant));
  Matrix b = relu(conv3(x.feats, km, p.b1, geom_invariant));
  b = relu(linear_forward(b, p.b2.weights, bias_of(p.b2)));
  b = relu(conv3(b, km, p.b3, geom_invariant));
  if (a.cols() + b.cols() != c) throw DimensionError("inception block: branches do not concatenate to C channels");
  Matrix out(x.feats.rows(), c);
  out << a, b;
  out += x.feats;
  return {x.level, x.coords, relu(std::move(out))};
}

voxel::SparseTensor res_block(const voxel::SparseTensor& x, const KernelMap& km, const ResParams& p,
                              bool geom_invariant) {
  const Matrix h = relu(conv3(relu(conv3(x.feats, km, p.c1, geom_invariant)), km, p.c2, geom_invariant));
  if (h.cols() != x.channels()) throw DimensionError("res block: output channels differ from input");
  return {x.level, x.coords, relu(x.feats + h)};
}

}  // namespace b2p::sparse
