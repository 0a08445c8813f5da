#include "b2p/metrics/image_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "b2p/error.hpp"

namespace b2p::metrics {
namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_pair(const Image& x, const Image& y, const char* op) {
  if (!x.same_shape(y)) {
    throw DimensionError(std::string(op) + ": image sizes " + std::to_string(x.width) + "x" + std::to_string(x.height) +
                         " and " + std::to_string(y.width) + "x" + std::to_string(y.height) + " differ");
  }
  if (x.width <= 0 || x.height <= 0) throw DimensionError(std::string(op) + ": empty image");
}

Plane channel(const Image& img, int c) {
  Plane p(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) p(y, x) = img.at(x, y, c);
  }
  return p;
}

// Separable valid-mode correlation.
Plane filter_valid(const Plane& in, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const Eigen::Index h = in.rows(), w = in.cols();
  Plane tmp = Plane::Zero(h, w - k + 1);
  for (int b = 0; b < k; ++b) tmp += g[b] * in.middleCols(b, w - k + 1);
  Plane out = Plane::Zero(h - k + 1, w - k + 1);
  for (int a = 0; a < k; ++a) out += g[a] * tmp.middleRows(a, h - k + 1);
  return out;
}

// Adjoint of filter_valid.
Plane filter_valid_adjoint(const Plane& grad, const std::vector<double>& g, Eigen::Index h, Eigen::Index w) {
  const int k = static_cast<int>(g.size());
  Plane tmp = Plane::Zero(h, grad.cols());
  for (int a = 0; a < k; ++a) tmp.middleRows(a, grad.rows()) += g[a] * grad;
  Plane out = Plane::Zero(h, w);
  for (int b = 0; b < k; ++b) out.middleCols(b, grad.cols()) += g[b] * tmp;
  return out;
}

struct ChannelSsim {
  double ssim = 0.0;
  double cs = 0.0;
};

ChannelSsim channel_ssim(const Plane& x, const Plane& y, const std::vector<double>& g, Plane* grad_x) {
  const Plane mx = filter_valid(x, g);
  const Plane my = filter_valid(y, g);
  const Plane sxx = filter_valid(x * x, g) - mx * mx;
  const Plane syy = filter_valid(y * y, g) - my * my;
  const Plane sxy = filter_valid(x * y, g) - mx * my;
  const Plane a1 = 2.0 * mx * my + kSsimC1;
  const Plane a2 = 2.0 * sxy + kSsimC2;
  const Plane b1 = mx * mx + my * my + kSsimC1;
  const Plane b2 = sxx + syy + kSsimC2;
  const Plane s = (a1 * a2) / (b1 * b2);
  const double count = static_cast<double>(s.size());
  ChannelSsim out{s.sum() / count, (a2 / b2).sum() / count};
  if (grad_x) {
    const Plane d_mu = 2.0 * my * a2 / (b1 * b2) - 2.0 * mx * s / b1;
    const Plane d_var = -s / b2;
    const Plane d_cov = 2.0 * a1 / (b1 * b2);
    // Moments m1 = E[x], m2 = E[x^2], m12 = E[xy].
    const Plane d_m1 = (d_mu - 2.0 * mx * d_var - my * d_cov) / count;
    const Plane d_m2 = d_var / count;
    const Plane d_m12 = d_cov / count;
    *grad_x = filter_valid_adjoint(d_m1, g, x.rows(), x.cols()) +
              2.0 * x * filter_valid_adjoint(d_m2, g, x.rows(), x.cols()) +
              y * filter_valid_adjoint(d_m12, g, x.rows(), x.cols());
  }
  return out;
}

}  // namespace

double mse(const Image& x, const Image& y) {
  check_pair(x, y, "mse");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr(const Image& x, const Image& y) {
  const double m = mse(x, y);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

std::vector<double> gaussian_window(int size, double sigma) {
  if (size <= 0) throw DimensionError("gaussian window: size must be positive");
  std::vector<double> g(static_cast<size_t>(size));
  const double c = 0.5 * (size - 1);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

int window_size(int width, int height) { return std::min({kSsimWindow, width, height}); }

SsimTerms ssim_terms(const Image& x, const Image& y) {
  check_pair(x, y, "ssim");
  const auto g = gaussian_window(window_size(x.width, x.height));
  SsimTerms t;
  for (int c = 0; c < 3; ++c) {
    const ChannelSsim r = channel_ssim(channel(x, c), channel(y, c), g, nullptr);
    t.ssim += r.ssim / 3.0;
    t.cs += r.cs / 3.0;
  }
  return t;
}

double ssim(const Image& x, const Image& y) { return ssim_terms(x, y).ssim; }

double ssim_with_grad(const Image& x, const Image& y, Image* grad_x) {
  check_pair(x, y, "ssim");
  const auto g = gaussian_window(window_size(x.width, x.height));
  if (grad_x) *grad_x = Image(x.width, x.height);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    Plane gp;
    total += channel_ssim(channel(x, c), channel(y, c), g, grad_x ? &gp : nullptr).ssim / 3.0;
    if (grad_x) {
      for (int yy = 0; yy < x.height; ++yy) {
        for (int xx = 0; xx < x.width; ++xx) grad_x->at(xx, yy, c) = gp(yy, xx) / 3.0;
      }
    }
  }
  return total;
}

Image downsample2(const Image& x) {
  const int w = x.width / 2, h = x.height / 2;
  if (w == 0 || h == 0) throw DimensionError("downsample: image too small");
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      for (int c = 0; c < 3; ++c) {
        out.at(xx, y, c) = 0.25 * (x.at(2 * xx, 2 * y, c) + x.at(2 * xx + 1, 2 * y, c) + x.at(2 * xx, 2 * y + 1, c) +
                                   x.at(2 * xx + 1, 2 * y + 1, c));
      }
    }
  }
  return out;
}

double ms_ssim(const Image& x, const Image& y) {
  check_pair(x, y, "ms-ssim");
  if (x.width < 16 || x.height < 16) throw DimensionError("ms-ssim: images must be at least 16x16 for five scales");
  double channel_total = 0.0;
  for (int c = 0; c < 3; ++c) {
    Image a(x.width, x.height), b(x.width, x.height);
    for (int yy = 0; yy < x.height; ++yy) {
      for (int xx = 0; xx < x.width; ++xx) {
        for (int k = 0; k < 3; ++k) {
          a.at(xx, yy, k) = x.at(xx, yy, c);
          b.at(xx, yy, k) = y.at(xx, yy, c);
        }
      }
    }
    double value = 1.0;
    for (int s = 0; s < 5; ++s) {
      const auto g = gaussian_window(window_size(a.width, a.height));
      const ChannelSsim r = channel_ssim(channel(a, 0), channel(b, 0), g, nullptr);
      const double term = s == 4 ? r.ssim : r.cs;
      value *= std::pow(std::max(term, 0.0), kMsSsimWeights[s]);
      if (s < 4) {
        a = downsample2(a);
        b = downsample2(b);
      }
    }
    channel_total += value;
  }
  return channel_total / 3.0;
}

}  // namespace b2p::metrics
