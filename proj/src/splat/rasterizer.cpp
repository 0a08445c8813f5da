#include "b2p/splat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "b2p/error.hpp"

namespace b2p::splat {
namespace {

constexpr int kGrad2D = 9;  // mean xy, conic a b c, opacity, color rgb

void check_finite(std::span<const Gaussian3D> gaussians) {
  static const char* names[kGaussianParams] = {"mean.x", "mean.y", "mean.z", "scale.x", "scale.y",
                                               "scale.z", "quat.w", "quat.x", "quat.y", "quat.z",
                                               "opacity", "color.r", "color.g", "color.b"};
  const Matrix m = to_matrix(gaussians);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (int k = 0; k < kGaussianParams; ++k)
      if (!std::isfinite(m(i, k))) {
        throw NumericError("gaussian " + std::to_string(i) + ": non-finite " + names[k]);
      }
}

struct Prepared {
  std::vector<Splat2D> splats;
  std::vector<int32_t> order;  // active Gaussians by (depth, index)
  RenderStats stats;
};

Prepared prepare(std::span<const Gaussian3D> gaussians, const Camera& cam) {
  check_finite(gaussians);
  Prepared out;
  out.splats.resize(gaussians.size());
  for (size_t i = 0; i < gaussians.size(); ++i) {
    const Gaussian3D& g = gaussians[i];
    Splat2D& s = out.splats[i];
    s.proj = project(g.mean, cam);
    if (!s.proj.visible || g.opacity < kAlphaMin) {
      ++out.stats.culled;
      continue;
    }
    const ScreenCov sc = screen_cov(covariance(g.scales, g.quat), cam, s.proj.J);
    const double det = sc.cov.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
      ++out.stats.singular;
      continue;
    }
    if (sc.regularized) ++out.stats.regularized;
    s.cov = sc.cov;
    s.conic << sc.cov(1, 1) / det, -sc.cov(0, 1) / det, -sc.cov(0, 1) / det, sc.cov(0, 0) / det;
    // o * G >= 1/255 exactly inside the ellipse d^T conic d <= 2 ln(255 o);
    // its half-extents are sqrt(k * cov_xx) and sqrt(k * cov_yy).
    const double k = 2.0 * std::log(255.0 * std::min(g.opacity, 1.0));
    const double hx = std::sqrt(std::max(k, 0.0) * sc.cov(0, 0));
    const double hy = std::sqrt(std::max(k, 0.0) * sc.cov(1, 1));
    const double mx = s.proj.screen.x(), my = s.proj.screen.y();
    const double fx0 = std::ceil(mx - hx - 0.5) - 1, fx1 = std::floor(mx + hx - 0.5) + 1;
    const double fy0 = std::ceil(my - hy - 0.5) - 1, fy1 = std::floor(my + hy - 0.5) + 1;
    if (fx1 < 0 || fy1 < 0 || fx0 > cam.width - 1 || fy0 > cam.height - 1) {
      ++out.stats.culled;
      continue;
    }
    s.x0 = static_cast<int>(std::max(fx0, 0.0));
    s.x1 = static_cast<int>(std::min(fx1, cam.width - 1.0));
    s.y0 = static_cast<int>(std::max(fy0, 0.0));
    s.y1 = static_cast<int>(std::min(fy1, cam.height - 1.0));
    s.active = true;
    out.order.push_back(static_cast<int32_t>(i));
  }
  std::sort(out.order.begin(), out.order.end(), [&](int32_t a, int32_t b) {
    const double da = out.splats[a].proj.depth, db = out.splats[b].proj.depth;
    return da < db || (da == db && a < b);
  });
  return out;
}

double gaussian_weight(const Splat2D& s, double px, double py, double* dx_out = nullptr, double* dy_out = nullptr) {
  const double dx = px - s.proj.screen.x();
  const double dy = py - s.proj.screen.y();
  if (dx_out) *dx_out = dx;
  if (dy_out) *dy_out = dy;
  const double power = -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
  return std::exp(power);
}

}  // namespace

Image rasterize(std::span<const Gaussian3D> gaussians, const Camera& cam, const RasterOptions& opt,
                RenderAux* aux) {
  if (cam.width <= 0 || cam.height <= 0 || opt.tile <= 0) throw ConfigError("rasterize: empty image or tile");
  Prepared prep = prepare(gaussians, cam);
  Image img(cam.width, cam.height);
  std::vector<double> final_t(static_cast<size_t>(cam.width) * cam.height, 1.0);

  const int tiles_x = (cam.width + opt.tile - 1) / opt.tile;
  const int tiles_y = (cam.height + opt.tile - 1) / opt.tile;
  std::vector<TileRecord> tiles(static_cast<size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      TileRecord& t = tiles[static_cast<size_t>(ty) * tiles_x + tx];
      t.x0 = tx * opt.tile;
      t.y0 = ty * opt.tile;
      t.x1 = std::min(t.x0 + opt.tile, cam.width);
      t.y1 = std::min(t.y0 + opt.tile, cam.height);
    }
  for (int32_t i : prep.order) {
    const Splat2D& s = prep.splats[i];
    for (int ty = s.y0 / opt.tile; ty <= s.y1 / opt.tile; ++ty)
      for (int tx = s.x0 / opt.tile; tx <= s.x1 / opt.tile; ++tx)
        tiles[static_cast<size_t>(ty) * tiles_x + tx].gaussians.push_back(i);
  }

  std::vector<RenderStats> tile_stats(tiles.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t ti = 0; ti < tiles.size(); ++ti) {
    TileRecord& t = tiles[ti];
    RenderStats& st = tile_stats[ti];
    t.pixel_ptr.assign(1, 0);
    for (int py = t.y0; py < t.y1; ++py)
      for (int px = t.x0; px < t.x1; ++px) {
        double T = 1.0;
        double rgb[3] = {0, 0, 0};
        for (size_t slot = 0; slot < t.gaussians.size(); ++slot) {
          const int32_t gi = t.gaussians[slot];
          const Splat2D& s = prep.splats[gi];
          if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
          const double raw = gaussians[gi].opacity * gaussian_weight(s, px + 0.5, py + 0.5);
          const double alpha = std::clamp(raw, 0.0, kAlphaMax);
          if (alpha < kAlphaMin) continue;
          if (raw > kAlphaMax) ++st.clamped;
          ++st.contributions;
          t.contribs.push_back({static_cast<int32_t>(slot), alpha, T});
          for (int c = 0; c < 3; ++c) rgb[c] += T * alpha * gaussians[gi].color[c];
          T *= 1.0 - alpha;
          if (T < opt.termination) {
            ++st.terminated;
            break;
          }
        }
        for (int c = 0; c < 3; ++c) img.at(px, py, c) = rgb[c];
        final_t[static_cast<size_t>(py) * cam.width + px] = T;
        t.pixel_ptr.push_back(static_cast<int32_t>(t.contribs.size()));
      }
  }
  for (const RenderStats& st : tile_stats) {
    prep.stats.contributions += st.contributions;
    prep.stats.clamped += st.clamped;
    prep.stats.terminated += st.terminated;
  }
  if (aux) {
    aux->splats = std::move(prep.splats);
    aux->tiles = std::move(tiles);
    aux->final_transmittance = std::move(final_t);
    aux->stats = prep.stats;
  }
  return img;
}

Matrix rasterize_backward(std::span<const Gaussian3D> gaussians, const Camera& cam, const RenderAux& aux,
                          const Image& grad_image) {
  if (grad_image.width != cam.width || grad_image.height != cam.height) {
    throw DimensionError("rasterize_backward: gradient image size mismatch");
  }
  if (aux.splats.size() != gaussians.size()) throw DimensionError("rasterize_backward: aux from another scene");
  const size_t n = gaussians.size();

  // Screen-space gradients per tile, reduced in tile order.
  std::vector<Matrix> local(aux.tiles.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t ti = 0; ti < aux.tiles.size(); ++ti) {
    const TileRecord& t = aux.tiles[ti];
    Matrix& g2 = local[ti];
    g2.setZero(static_cast<Eigen::Index>(t.gaussians.size()), kGrad2D);
    size_t p = 0;
    for (int py = t.y0; py < t.y1; ++py)
      for (int px = t.x0; px < t.x1; ++px, ++p) {
        const double up[3] = {grad_image.at(px, py, 0), grad_image.at(px, py, 1), grad_image.at(px, py, 2)};
        double suffix = 0.0;
        for (int32_t k = t.pixel_ptr[p + 1] - 1; k >= t.pixel_ptr[p]; --k) {
          const Contribution& ct = t.contribs[k];
          const int32_t gi = t.gaussians[ct.slot];
          const Gaussian3D& g = gaussians[gi];
          const Splat2D& s = aux.splats[gi];
          auto row = g2.row(ct.slot);
          const double ta = ct.transmittance * ct.alpha;
          double cg = 0.0;
          for (int c = 0; c < 3; ++c) {
            row(6 + c) += ta * up[c];
            cg += g.color[c] * up[c];
          }
          const double d_alpha = ct.transmittance * cg - suffix / (1.0 - ct.alpha);
          suffix += ta * cg;
          double dx = 0, dy = 0;
          const double w = gaussian_weight(s, px + 0.5, py + 0.5, &dx, &dy);
          if (g.opacity * w > kAlphaMax) continue;
          row(5) += d_alpha * w;
          const double d_power = d_alpha * g.opacity * w;
          const double a = s.conic(0, 0), b = s.conic(0, 1), c = s.conic(1, 1);
          row(0) += d_power * (a * dx + b * dy);
          row(1) += d_power * (b * dx + c * dy);
          row(2) += d_power * (-0.5 * dx * dx);
          row(3) += d_power * (-dx * dy);
          row(4) += d_power * (-0.5 * dy * dy);
        }
      }
  }
  Matrix g2d = Matrix::Zero(static_cast<Eigen::Index>(n), kGrad2D);
  for (size_t ti = 0; ti < aux.tiles.size(); ++ti)
    for (size_t slot = 0; slot < aux.tiles[ti].gaussians.size(); ++slot)
      g2d.row(aux.tiles[ti].gaussians[slot]) += local[ti].row(static_cast<Eigen::Index>(slot));

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), kGaussianParams);
#pragma omp parallel for schedule(static)
  for (size_t i = 0; i < n; ++i) {
    const Splat2D& s = aux.splats[i];
    if (!s.active) continue;
    const Gaussian3D& g = gaussians[i];
    const auto d = g2d.row(static_cast<Eigen::Index>(i));
    auto o = out.row(static_cast<Eigen::Index>(i));
    for (int c = 0; c < 3; ++c) o(kColColor + c) = d(6 + c);
    o(kColOpacity) = d(5);

    Eigen::Matrix2d g_conic;
    g_conic << d(2), 0.5 * d(3), 0.5 * d(3), d(4);
    const Eigen::Matrix2d g_cov = -s.conic * g_conic * s.conic;

    const Mat3 rq = quat_to_rot(g.quat);
    const Eigen::Vector3d s2(g.scales[0] * g.scales[0], g.scales[1] * g.scales[1], g.scales[2] * g.scales[2]);
    const Mat3 sigma = rq.transpose() * s2.asDiagonal() * rq;
    const Mat3 m = cam.R * sigma * cam.R.transpose();
    const Eigen::Matrix<double, 2, 3>& J = s.proj.J;
    const Mat3 g_m = J.transpose() * g_cov * J;
    const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov * J * m;
    const Mat3 g_sigma = cam.R.transpose() * g_m * cam.R;

    const double x = s.proj.cam.x(), y = s.proj.cam.y(), z = s.proj.cam.z();
    Eigen::Vector3d g_t = J.transpose() * Eigen::Vector2d(d(0), d(1));
    g_t.x() += g_j(0, 2) * (-cam.fx / (z * z));
    g_t.y() += g_j(1, 2) * (-cam.fy / (z * z));
    g_t.z() += g_j(0, 0) * (-cam.fx / (z * z)) + g_j(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
               g_j(1, 1) * (-cam.fy / (z * z)) + g_j(1, 2) * (2.0 * cam.fy * y / (z * z * z));
    const Eigen::Vector3d g_mean = cam.R.transpose() * g_t;
    for (int k = 0; k < 3; ++k) o(kColMean + k) = g_mean(k);

    const Mat3 rgr = rq * g_sigma * rq.transpose();
    for (int k = 0; k < 3; ++k) o(kColScale + k) = 2.0 * g.scales[k] * rgr(k, k);
    const Mat3 gr = 2.0 * s2.asDiagonal() * rq * g_sigma;
    const double qw = g.quat[0], qx = g.quat[1], qy = g.quat[2], qz = g.quat[3];
    o(kColQuat + 0) = 2 * (-qz * gr(0, 1) + qy * gr(0, 2) + qz * gr(1, 0) - qx * gr(1, 2) - qy * gr(2, 0) + qx * gr(2, 1));
    o(kColQuat + 1) = 2 * (qy * gr(0, 1) + qz * gr(0, 2) + qy * gr(1, 0) - 2 * qx * gr(1, 1) - qw * gr(1, 2) +
                           qz * gr(2, 0) + qw * gr(2, 1) - 2 * qx * gr(2, 2));
    o(kColQuat + 2) = 2 * (-2 * qy * gr(0, 0) + qx * gr(0, 1) + qw * gr(0, 2) + qx * gr(1, 0) + qz * gr(1, 2) -
                           qw * gr(2, 0) + qz * gr(2, 1) - 2 * qy * gr(2, 2));
    o(kColQuat + 3) = 2 * (-2 * qz * gr(0, 0) - qw * gr(0, 1) + qx * gr(0, 2) + qw * gr(1, 0) - 2 * qz * gr(1, 1) +
                           qy * gr(1, 2) + qx * gr(2, 0) + qy * gr(2, 1));
  }
  return out;
}

Image brute_force_render(std::span<const Gaussian3D> gaussians, const Camera& cam) {
  check_finite(gaussians);
  struct Item {
    double depth;
    size_t index;
    Eigen::Vector2d mean;
    Eigen::Matrix2d inv;
  };
  std::vector<Item> items;
  for (size_t i = 0; i < gaussians.size(); ++i) {
    const Gaussian3D& g = gaussians[i];
    const Eigen::Vector3d pc = cam.R * Eigen::Vector3d(g.mean[0], g.mean[1], g.mean[2]) + cam.t;
    if (!(pc.z() > cam.near_plane)) continue;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / pc.z(), 0, -cam.fx * pc.x() / (pc.z() * pc.z()), 0, cam.fy / pc.z(),
        -cam.fy * pc.y() / (pc.z() * pc.z());
    Eigen::Matrix2d cov = J * cam.R * covariance(g.scales, g.quat) * cam.R.transpose() * J.transpose();
    cov(1, 0) = cov(0, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < kScreenCovFloor) cov += kScreenCovFloor * Eigen::Matrix2d::Identity();
    if (!(cov.determinant() > 0.0)) continue;
    items.push_back({pc.z(), i, {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy}, cov.inverse()});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.depth < b.depth || (a.depth == b.depth && a.index < b.index); });
  Image img(cam.width, cam.height);
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px) {
      double T = 1.0;
      const Eigen::Vector2d pix(px + 0.5, py + 0.5);
      for (const Item& it : items) {
        const Eigen::Vector2d d = pix - it.mean;
        const double alpha = std::min(kAlphaMax, gaussians[it.index].opacity * std::exp(-0.5 * d.dot(it.inv * d)));
        if (alpha < kAlphaMin) continue;
        for (int c = 0; c < 3; ++c) img.at(px, py, c) += T * alpha * gaussians[it.index].color[c];
        T *= 1.0 - alpha;
      }
    }
  return img;
}

}  // namespace b2p::splat
