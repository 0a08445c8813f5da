#include "b2p/ad/losses.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "b2p/codec/gaussian_model.hpp"
#include "b2p/error.hpp"
#include "b2p/metrics/image_metrics.hpp"

namespace b2p::ad {

Var rate_bits(Tape& t, Var x, Var mu, Var sigma) {
  const Matrix &xv = t.value(x), &mv = t.value(mu), &sv = t.value(sigma);
  if (xv.rows() != mv.rows() || xv.cols() != mv.cols() || xv.rows() != sv.rows() || xv.cols() != sv.cols()) {
    throw DimensionError("rate: symbol, mean and scale shapes differ");
  }
  Matrix dx(xv.rows(), xv.cols()), dmu(xv.rows(), xv.cols()), dsigma(xv.rows(), xv.cols());
  double bits = 0.0;
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const double xi = xv.data()[i], mi = mv.data()[i], si = sv.data()[i];
    if (!std::isfinite(xi) || !std::isfinite(mi) || !std::isfinite(si)) {
      throw NumericError("rate: non-finite input at entry " + std::to_string(i));
    }
    const codec::BinProbGrad g = codec::gaussian_bin_prob_grad(xi, mi, si);
    bits += codec::symbol_bits(g.p);
    const double k = g.p > codec::kProbFloor ? -1.0 / (g.p * std::numbers::ln2) : 0.0;
    dx.data()[i] = k * g.dx;
    dmu.data()[i] = k * g.dmu;
    dsigma.data()[i] = k * g.dsigma;
  }
  Matrix out(1, 1);
  out(0, 0) = bits;
  auto saved = std::make_shared<std::array<Matrix, 3>>(std::array<Matrix, 3>{std::move(dx), std::move(dmu), std::move(dsigma)});
  return t.record(std::move(out), {x, mu, sigma}, [x, mu, sigma, saved](Tape& tp, const Matrix& g) {
    const double s = g(0, 0);
    if (tp.requires_grad(x)) tp.accumulate(x, s * (*saved)[0]);
    if (tp.requires_grad(mu)) tp.accumulate(mu, s * (*saved)[1]);
    if (tp.requires_grad(sigma)) tp.accumulate(sigma, s * (*saved)[2]);
  });
}

Matrix image_to_matrix(const Image& img) {
  return Eigen::Map<const Matrix>(img.data.data(), static_cast<Eigen::Index>(img.width) * img.height, 3);
}

Image matrix_to_image(const Matrix& m, int width, int height) {
  if (m.rows() != static_cast<Eigen::Index>(width) * height || m.cols() != 3) {
    throw DimensionError("image: matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         ", expected " + std::to_string(width * height) + "x3");
  }
  Image img(width, height);
  std::copy(m.data(), m.data() + m.size(), img.data.begin());
  return img;
}

namespace {

void check_image(const Matrix& m, const Image& target, const char* op) {
  if (m.rows() != static_cast<Eigen::Index>(target.width) * target.height || m.cols() != 3) {
    throw DimensionError(std::string(op) + ": render and target sizes differ");
  }
}

}  // namespace

Var l1_loss(Tape& t, Var img, const Image& target) {
  const Matrix& v = t.value(img);
  check_image(v, target, "l1");
  const Matrix tm = image_to_matrix(target);
  const Matrix diff = v - tm;
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum() / n;
  Matrix sign = diff.unaryExpr([n](double d) { return d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0); });
  auto saved = std::make_shared<Matrix>(std::move(sign));
  return t.record(std::move(out), {img}, [img, saved](Tape& tp, const Matrix& g) {
    tp.accumulate(img, g(0, 0) * *saved);
  });
}

Var ssim_loss(Tape& t, Var img, const Image& target) {
  const Matrix& v = t.value(img);
  check_image(v, target, "ssim");
  const Image x = matrix_to_image(v, target.width, target.height);
  Image grad;
  const double s = metrics::ssim_with_grad(x, target, t.recording() ? &grad : nullptr);
  Matrix out(1, 1);
  out(0, 0) = 1.0 - s;
  auto saved = std::make_shared<Matrix>(t.recording() ? Matrix(-image_to_matrix(grad)) : Matrix());
  return t.record(std::move(out), {img}, [img, saved](Tape& tp, const Matrix& g) {
    tp.accumulate(img, g(0, 0) * *saved);
  });
}

Var render(Tape& t, Var gaussians, const splat::Camera& cam, const splat::RasterOptions& opt,
           splat::RenderStats* stats) {
  const Matrix& gm = t.value(gaussians);
  if (gm.cols() != splat::kGaussianParams) throw DimensionError("render: expected 14 columns");
  auto gs = std::make_shared<std::vector<splat::Gaussian3D>>(splat::from_matrix(gm));
  auto aux = std::make_shared<splat::RenderAux>();
  const Image img = splat::rasterize(*gs, cam, opt, aux.get());
  if (stats) *stats = aux->stats;
  const int w = img.width, h = img.height;
  return t.record(image_to_matrix(img), {gaussians}, [gaussians, gs, aux, cam, w, h](Tape& tp, const Matrix& g) {
    tp.accumulate(gaussians, splat::rasterize_backward(*gs, cam, *aux, matrix_to_image(g, w, h)));
  });
}

}  // namespace b2p::ad
