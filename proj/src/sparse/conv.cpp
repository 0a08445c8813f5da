#include "b2p/sparse/conv.hpp"

#include <cmath>
#include <string>

#include "b2p/error.hpp"

namespace b2p::sparse {
namespace {

using Strided = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
using ConstStrided = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

std::string dims(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void check_bias(const RowVector* bias, Eigen::Index cout, const char* op) {
  if (bias && bias->size() != cout) {
    throw DimensionError(std::string(op) + ": bias length " + std::to_string(bias->size()) + " != " +
                         std::to_string(cout));
  }
}

Matrix gather_rows(const Matrix& src, const std::vector<std::pair<int32_t, int32_t>>& pairs, bool by_input) {
  Matrix out(static_cast<Eigen::Index>(pairs.size()), src.cols());
  for (size_t j = 0; j < pairs.size(); ++j) out.row(j) = src.row(by_input ? pairs[j].first : pairs[j].second);
  return out;
}

// Sums the per-pair rows of `rows` into each CSR row, offsets ascending.
void scatter_rows(const Matrix& rows, const std::vector<int32_t>& ptr, const std::vector<KernelMap::Entry>& entries,
                  Matrix& dst) {
  const Eigen::Index n = dst.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < n; ++r) {
    auto out = dst.row(r);
    for (int32_t k = ptr[r]; k < ptr[r + 1]; ++k) out += rows.row(entries[k].row);
  }
}

}  // namespace

void check_conv_shapes(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias) {
  if (static_cast<size_t>(x.rows()) != km.num_in) {
    throw DimensionError("conv: input has " + std::to_string(x.rows()) + " rows, kernel map expects " +
                         std::to_string(km.num_in));
  }
  const Eigen::Index expect = static_cast<Eigen::Index>(km.num_offsets()) * x.cols();
  if (w.rows() != expect) {
    throw DimensionError("conv: weights are " + dims(w.rows(), w.cols()) + ", expected " + std::to_string(expect) +
                         " rows for " + std::to_string(km.num_offsets()) + " offsets x " + std::to_string(x.cols()) +
                         " input channels");
  }
  check_bias(bias, w.cols(), "conv");
}

Matrix conv_forward(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias) {
  check_conv_shapes(x, km, w, bias);
  const Eigen::Index cin = x.cols();
  const Eigen::Index cout = w.cols();
  Matrix y(static_cast<Eigen::Index>(km.total_pairs()), cout);
  for (size_t o = 0; o < km.num_offsets(); ++o) {
    const auto& pairs = km.pairs[o];
    if (pairs.empty()) continue;
    const Matrix xg = gather_rows(x, pairs, true);
    y.middleRows(km.pair_begin[o], static_cast<Eigen::Index>(pairs.size())).noalias() =
        xg * w.middleRows(static_cast<Eigen::Index>(o) * cin, cin);
  }
  Matrix out(static_cast<Eigen::Index>(km.num_out), cout);
  if (bias) {
    out.rowwise() = *bias;
  } else {
    out.setZero();
  }
  scatter_rows(y, km.out_ptr, km.out_entries, out);
  return out;
}

void conv_backward(const Matrix& x, const KernelMap& km, const Matrix& w, const Matrix& grad_out, Matrix* grad_x,
                   Matrix* grad_w, RowVector* grad_bias) {
  const Eigen::Index cin = x.cols();
  const Eigen::Index cout = w.cols();
  Matrix z;
  if (grad_x) z.resize(static_cast<Eigen::Index>(km.total_pairs()), cin);
  for (size_t o = 0; o < km.num_offsets(); ++o) {
    const auto& pairs = km.pairs[o];
    if (pairs.empty()) continue;
    const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
    const Matrix gg = gather_rows(grad_out, pairs, false);
    const auto wo = w.middleRows(static_cast<Eigen::Index>(o) * cin, cin);
    if (grad_w) {
      const Matrix xg = gather_rows(x, pairs, true);
      grad_w->middleRows(static_cast<Eigen::Index>(o) * cin, cin).noalias() += xg.transpose() * gg;
    }
    if (grad_x) z.middleRows(km.pair_begin[o], n).noalias() = gg * wo.transpose();
  }
  if (grad_x) scatter_rows(z, km.in_ptr, km.in_entries, *grad_x);
  if (grad_bias) *grad_bias += grad_out.colwise().sum();
  (void)cout;
}

Matrix active_weight_sq(const KernelMap& km, const Matrix& w, Eigen::Index in_channels) {
  const Eigen::Index offsets = static_cast<Eigen::Index>(km.num_offsets());
  Matrix q(offsets, w.cols());
  for (Eigen::Index o = 0; o < offsets; ++o) {
    q.row(o) = w.middleRows(o * in_channels, in_channels).array().square().colwise().sum();
  }
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(km.num_out), w.cols());
  for (size_t b = 0; b < km.num_out; ++b) {
    for (int32_t k = km.out_ptr[b]; k < km.out_ptr[b + 1]; ++k) s.row(b) += q.row(km.out_entries[k].offset);
  }
  return s;
}

Matrix geom_conv_forward(const Matrix& x, const KernelMap& km, const Matrix& w, const RowVector* bias,
                         GeomConvSaved* saved) {
  check_conv_shapes(x, km, w, bias);
  Matrix num = conv_forward(x, km, w, nullptr);
  Matrix sq = active_weight_sq(km, w, x.cols());
  num.array() /= sq.array().sqrt().max(kGeomEps);
  Matrix out = num;
  if (bias) out.rowwise() += *bias;
  if (saved) {
    saved->normalized = std::move(num);
    saved->sq = std::move(sq);
  }
  return out;
}

void geom_conv_backward(const Matrix& x, const KernelMap& km, const Matrix& w, const GeomConvSaved& saved,
                        const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w, RowVector* grad_bias) {
  const Eigen::Index cin = x.cols();
  const Matrix den = saved.sq.array().sqrt().max(kGeomEps);
  const Matrix grad_num = grad_out.array() / den.array();
  conv_backward(x, km, w, grad_num, grad_x, grad_w, nullptr);
  if (grad_w) {
    // d out / d S = -out / (2 S) where the floor is inactive.
    Matrix grad_sq = (-0.5 * grad_out.array() * saved.normalized.array() / saved.sq.array()).matrix();
    for (Eigen::Index i = 0; i < grad_sq.size(); ++i) {
      if (!(std::sqrt(saved.sq.data()[i]) > kGeomEps)) grad_sq.data()[i] = 0.0;
    }
    Matrix grad_q = Matrix::Zero(static_cast<Eigen::Index>(km.num_offsets()), w.cols());
    for (size_t b = 0; b < km.num_out; ++b) {
      for (int32_t k = km.out_ptr[b]; k < km.out_ptr[b + 1]; ++k) grad_q.row(km.out_entries[k].offset) += grad_sq.row(b);
    }
    for (Eigen::Index o = 0; o < grad_q.rows(); ++o) {
      grad_w->middleRows(o * cin, cin).noalias() +=
          2.0 * (w.middleRows(o * cin, cin) * grad_q.row(o).asDiagonal());
    }
  }
  if (grad_bias) *grad_bias += grad_out.colwise().sum();
}

Matrix transposed_forward(const Matrix& x, const Matrix& w, const RowVector* bias) {
  const Eigen::Index cin = x.cols();
  const Eigen::Index cout = w.cols();
  if (w.rows() != 8 * cin) {
    throw DimensionError("transposed conv: weights are " + dims(w.rows(), cout) + ", expected " +
                         std::to_string(8 * cin) + " rows");
  }
  check_bias(bias, cout, "transposed conv");
  const Eigen::Index n = x.rows();
  Matrix out(8 * n, cout);
  for (Eigen::Index d = 0; d < 8; ++d) {
    Strided dst(out.data() + d * cout, n, cout, Eigen::OuterStride<>(8 * cout));
    dst.noalias() = x * w.middleRows(d * cin, cin);
    if (bias) dst.rowwise() += *bias;
  }
  return out;
}

void transposed_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w,
                         RowVector* grad_bias) {
  const Eigen::Index cin = x.cols();
  const Eigen::Index cout = w.cols();
  const Eigen::Index n = x.rows();
  for (Eigen::Index d = 0; d < 8; ++d) {
    ConstStrided g(grad_out.data() + d * cout, n, cout, Eigen::OuterStride<>(8 * cout));
    if (grad_w) grad_w->middleRows(d * cin, cin).noalias() += x.transpose() * g;
    if (grad_x) grad_x->noalias() += g * w.middleRows(d * cin, cin).transpose();
  }
  if (grad_bias) *grad_bias += grad_out.colwise().sum();
}

Matrix linear_forward(const Matrix& x, const Matrix& w, const RowVector* bias) {
  if (w.rows() != x.cols()) {
    throw DimensionError("linear: input has " + std::to_string(x.cols()) + " channels, weights are " +
                         dims(w.rows(), w.cols()));
  }
  check_bias(bias, w.cols(), "linear");
  Matrix out = x * w;
  if (bias) out.rowwise() += *bias;
  return out;
}

void linear_backward(const Matrix& x, const Matrix& w, const Matrix& grad_out, Matrix* grad_x, Matrix* grad_w,
                     RowVector* grad_bias) {
  if (grad_w) grad_w->noalias() += x.transpose() * grad_out;
  if (grad_x) grad_x->noalias() += grad_out * w.transpose();
  if (grad_bias) *grad_bias += grad_out.colwise().sum();
}

std::vector<Coord> child_coords(std::span<const Coord> parents) {
  std::vector<Coord> out;
  out.reserve(parents.size() * 8);
  for (const Coord& p : parents) {
    for (int d = 0; d < 8; ++d) out.push_back({2 * p[0] + (d & 1), 2 * p[1] + ((d >> 1) & 1), 2 * p[2] + ((d >> 2) & 1)});
  }
  return out;
}

namespace {

const RowVector* bias_of(const ConvParams& p) { return p.bias ? &*p.bias : nullptr; }

}  // namespace

voxel::SparseTensor sparse_conv(const voxel::SparseTensor& x, const KernelMap& km, const ConvParams& p) {
  return {x.level, x.coords, conv_forward(x.feats, km, p.weights, bias_of(p))};
}

voxel::SparseTensor geom_invariant_conv(const voxel::SparseTensor& x, const KernelMap& km, const ConvParams& p) {
  return {x.level, x.coords, geom_conv_forward(x.feats, km, p.weights, bias_of(p))};
}

voxel::SparseTensor transposed_conv_gen(const voxel::SparseTensor& x, const ConvParams& p) {
  return {x.level + 1, child_coords(x.coords), transposed_forward(x.feats, p.weights, bias_of(p))};
}

voxel::SparseTensor pointwise_linear(const voxel::SparseTensor& x, const ConvParams& p) {
  return {x.level, x.coords, linear_forward(x.feats, p.weights, bias_of(p))};
}

}  // namespace b2p::sparse
