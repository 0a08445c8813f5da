#include "b2p/ad/ops.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "b2p/error.hpp"
#include "b2p/sparse/conv.hpp"
#include "b2p/voxel/sparse_tensor.hpp"

namespace b2p::ad {
namespace {

std::optional<RowVector> bias_row(const Tape& t, Var b) {
  if (!b.valid()) return std::nullopt;
  const Matrix& m = t.value(b);
  if (m.rows() != 1) throw DimensionError("bias must be a single row");
  return RowVector(m.row(0));
}

const RowVector* ptr(const std::optional<RowVector>& b) { return b ? &*b : nullptr; }

// Runs a kernel backward into fresh buffers, then accumulates what is needed.
template <typename Fn>
void backward_into(Tape& t, Var x, Var w, Var b, Fn&& fn) {
  Matrix gx, gw;
  RowVector gb;
  const bool need_x = t.requires_grad(x), need_w = t.requires_grad(w), need_b = t.requires_grad(b);
  if (need_x) gx = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
  if (need_w) gw = Matrix::Zero(t.value(w).rows(), t.value(w).cols());
  if (need_b) gb = RowVector::Zero(t.value(w).cols());
  fn(need_x ? &gx : nullptr, need_w ? &gw : nullptr, need_b ? &gb : nullptr);
  if (need_x) t.accumulate(x, gx);
  if (need_w) t.accumulate(w, gw);
  if (need_b) t.accumulate(b, gb);
}

template <typename F, typename D>
Var unary(Tape& t, Var x, F f, D dfdx_from_xy) {
  Matrix y = t.value(x).unaryExpr(f);
  return t.record(std::move(y), {x}, [x, dfdx_from_xy](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(x);
    Matrix gx(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.size(); ++i) {
      const double gi = g.data()[i];
      gx.data()[i] = gi == 0.0 ? 0.0 : gi * dfdx_from_xy(xv.data()[i]);
    }
    tp.accumulate(x, gx);
  });
}

}  // namespace

Var conv(Tape& t, Var x, const sparse::KernelMap& km, Var w, Var b) {
  const auto br = bias_row(t, b);
  Matrix y = sparse::conv_forward(t.value(x), km, t.value(w), ptr(br));
  const sparse::KernelMap* kp = &km;
  return t.record(std::move(y), {x, w, b}, [x, w, b, kp](Tape& tp, const Matrix& g) {
    backward_into(tp, x, w, b, [&](Matrix* gx, Matrix* gw, RowVector* gb) {
      sparse::conv_backward(tp.value(x), *kp, tp.value(w), g, gx, gw, gb);
    });
  });
}

Var geom_conv(Tape& t, Var x, const sparse::KernelMap& km, Var w, Var b) {
  const auto br = bias_row(t, b);
  auto saved = std::make_shared<sparse::GeomConvSaved>();
  Matrix y = sparse::geom_conv_forward(t.value(x), km, t.value(w), ptr(br), t.recording() ? saved.get() : nullptr);
  const sparse::KernelMap* kp = &km;
  return t.record(std::move(y), {x, w, b}, [x, w, b, kp, saved](Tape& tp, const Matrix& g) {
    backward_into(tp, x, w, b, [&](Matrix* gx, Matrix* gw, RowVector* gb) {
      sparse::geom_conv_backward(tp.value(x), *kp, tp.value(w), *saved, g, gx, gw, gb);
    });
  });
}

Var transposed(Tape& t, Var x, Var w, Var b) {
  const auto br = bias_row(t, b);
  Matrix y = sparse::transposed_forward(t.value(x), t.value(w), ptr(br));
  return t.record(std::move(y), {x, w, b}, [x, w, b](Tape& tp, const Matrix& g) {
    backward_into(tp, x, w, b, [&](Matrix* gx, Matrix* gw, RowVector* gb) {
      sparse::transposed_backward(tp.value(x), tp.value(w), g, gx, gw, gb);
    });
  });
}

Var linear(Tape& t, Var x, Var w, Var b) {
  const auto br = bias_row(t, b);
  Matrix y = sparse::linear_forward(t.value(x), t.value(w), ptr(br));
  return t.record(std::move(y), {x, w, b}, [x, w, b](Tape& tp, const Matrix& g) {
    backward_into(tp, x, w, b, [&](Matrix* gx, Matrix* gw, RowVector* gb) {
      sparse::linear_backward(tp.value(x), tp.value(w), g, gx, gw, gb);
    });
  });
}

Var relu(Tape& t, Var x) {
  return unary(t, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var exp(Tape& t, Var x) {
  return unary(t, x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var sigmoid(Tape& t, Var x) {
  auto s = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  return unary(t, x, s, [s](double v) {
    const double y = s(v);
    return y * (1.0 - y);
  });
}

Var tanh(Tape& t, Var x) {
  return unary(t, x, [](double v) { return std::tanh(v); }, [](double v) {
    const double y = std::tanh(v);
    return 1.0 - y * y;
  });
}

Var clamp(Tape& t, Var x, double lo, double hi) {
  return unary(t, x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
               [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

namespace {

void same_shape(const Tape& t, Var a, Var b, const char* op) {
  const Matrix &x = t.value(a), &y = t.value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         " and " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
  same_shape(t, a, b, "add");
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  same_shape(t, a, b, "sub");
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var mul(Tape& t, Var a, Var b) {
  same_shape(t, a, b, "mul");
  return t.record(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.record(s * t.value(a), {a}, [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, s * g); });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix &x = t.value(a), &y = t.value(b);
  if (x.rows() != y.rows()) throw DimensionError("concat: row counts differ");
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  const Eigen::Index ca = x.cols(), cb = y.cols();
  return t.record(std::move(out), {a, b}, [a, b, ca, cb](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.leftCols(ca));
    if (tp.requires_grad(b)) tp.accumulate(b, g.rightCols(cb));
  });
}

Var slice_cols(Tape& t, Var x, Eigen::Index begin, Eigen::Index count) {
  const Matrix& v = t.value(x);
  if (begin < 0 || count < 0 || begin + count > v.cols()) throw DimensionError("slice_cols: out of range");
  return t.record(v.middleCols(begin, count), {x}, [x, begin, count](Tape& tp, const Matrix& g) {
    Matrix& gx = tp.grad(x);
    gx.middleCols(begin, count) += g;
  });
}

Var pool(Tape& t, Var x, std::span<const int32_t> offsets) {
  if (offsets.empty() || offsets.back() != t.value(x).rows()) throw DimensionError("pool: child map does not match rows");
  Matrix y = voxel::pool_rows(t.value(x), offsets);
  return t.record(std::move(y), {x}, [x, offsets](Tape& tp, const Matrix& g) {
    Matrix& gx = tp.grad(x);
    for (size_t p = 0; p + 1 < offsets.size(); ++p) {
      const double inv = 1.0 / static_cast<double>(offsets[p + 1] - offsets[p]);
      for (int32_t c = offsets[p]; c < offsets[p + 1]; ++c) gx.row(c) += inv * g.row(static_cast<Eigen::Index>(p));
    }
  });
}

Var upsample(Tape& t, Var x, std::span<const int32_t> parents) {
  Matrix y = voxel::upsample_rows(t.value(x), parents);
  return t.record(std::move(y), {x}, [x, parents](Tape& tp, const Matrix& g) {
    Matrix& gx = tp.grad(x);
    for (size_t i = 0; i < parents.size(); ++i) gx.row(parents[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var sum(Tape& t, Var x) {
  Matrix s(1, 1);
  s(0, 0) = t.value(x).sum();
  return t.record(std::move(s), {x}, [x](Tape& tp, const Matrix& g) {
    Matrix& gx = tp.grad(x);
    gx.array() += g(0, 0);
  });
}

Var mean(Tape& t, Var x) {
  const double n = static_cast<double>(t.value(x).size());
  return scale(t, sum(t, x), 1.0 / n);
}

Var inception_block(Tape& t, Var x, const sparse::KernelMap& km, const InceptionVars& p, bool geom) {
  const Eigen::Index c = t.value(x).cols();
  if (c % 4 != 0) throw ConfigError("inception block: channel count " + std::to_string(c) + " not divisible by 4");
  auto cv = [&](Var in, const ConvVars& q) { return geom ? geom_conv(t, in, km, q.w, q.b) : conv(t, in, km, q.w, q.b); };
  const Var a = relu(t, cv(relu(t, cv(x, p.a1)), p.a2));
  Var b = relu(t, cv(x, p.b1));
  b = relu(t, linear(t, b, p.b2.w, p.b2.b));
  b = relu(t, cv(b, p.b3));
  return relu(t, add(t, concat_cols(t, a, b), x));
}

Var res_block(Tape& t, Var x, const sparse::KernelMap& km, const ResVars& p, bool geom) {
  auto cv = [&](Var in, const ConvVars& q) { return geom ? geom_conv(t, in, km, q.w, q.b) : conv(t, in, km, q.w, q.b); };
  const Var h = relu(t, cv(relu(t, cv(x, p.c1)), p.c2));
  return relu(t, add(t, x, h));
}

}  // namespace b2p::ad
