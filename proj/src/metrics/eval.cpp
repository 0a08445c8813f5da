#include "b2p/metrics/eval.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "b2p/error.hpp"
#include "b2p/metrics/image_metrics.hpp"
#include "b2p/net/pipeline.hpp"
#include "b2p/splat/image_io.hpp"
#include "b2p/splat/rasterizer.hpp"

namespace b2p::metrics {

splat::Camera circle_camera(double azimuth, const ViewRig& rig) {
  const Vec3 eye{rig.target[0] + rig.radius * std::sin(azimuth), rig.target[1] - rig.radius * std::cos(azimuth),
                 rig.target[2] + rig.height};
  return splat::look_at(eye, rig.target, {0, 0, 1}, rig.focal, rig.width, rig.height_px);
}

std::vector<splat::Camera> camera_circle(int count, const ViewRig& rig, double phase) {
  if (count < 1) throw ConfigError("camera circle: count must be at least 1");
  std::vector<splat::Camera> cams;
  for (int k = 0; k < count; ++k) cams.push_back(circle_camera(phase + 2.0 * std::numbers::pi * k / count, rig));
  return cams;
}

ViewRig fit_rig(std::span<const Vec3> centers, int width, int height) {
  if (centers.empty()) throw ConfigError("fit_rig: no points");
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const Vec3& p : centers) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  ViewRig rig;
  for (int k = 0; k < 3; ++k) rig.target[k] = 0.5 * (lo[k] + hi[k]);
  double r = 0.0;
  for (const Vec3& p : centers) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (p[k] - rig.target[k]) * (p[k] - rig.target[k]);
    r = std::max(r, std::sqrt(d2));
  }
  r += 1.0;
  const double dist = 2.5 * r;
  rig.radius = dist * std::cos(std::atan(0.2));
  rig.height = dist * std::sin(std::atan(0.2));
  rig.width = width;
  rig.height_px = height;
  // tan(half field of view) = 1.1 r / sqrt(d^2 - r^2) on the shorter side.
  rig.focal = 0.5 * std::min(width, height) * std::sqrt(dist * dist - r * r) / (1.1 * r);
  return rig;
}

ViewRig fit_rig(const voxel::PointCloud& pc, int width, int height) {
  std::vector<Vec3> c;
  c.reserve(pc.size());
  for (const Coord& p : pc.points) c.push_back({p[0] + 0.5, p[1] + 0.5, p[2] + 0.5});
  return fit_rig(c, width, height);
}

std::vector<splat::Gaussian3D> reference_gaussians(const voxel::PointCloud& pc) {
  std::vector<splat::Gaussian3D> g(pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    g[i].mean = {pc.points[i][0] + 0.5, pc.points[i][1] + 0.5, pc.points[i][2] + 0.5};
    g[i].scales = {0.5, 0.5, 0.5};
    g[i].quat = {1, 0, 0, 0};
    g[i].opacity = 1.0;
    g[i].color = pc.colors[i];
  }
  return g;
}

std::vector<Image> ground_truth_views(const voxel::PointCloud& pc, const std::vector<splat::Camera>& cams) {
  const auto ref = reference_gaussians(pc);
  std::vector<Image> out;
  for (const auto& c : cams) out.push_back(splat::brute_force_render(ref, c));
  return out;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RDReport evaluate(const codec::LayeredBitstream& stream, const net::B2PModel& model,
                  const std::vector<splat::Camera>& cams, const std::vector<Image>& ground_truth,
                  const EvalConfig& cfg) {
  if (cams.size() != ground_truth.size() || cams.empty()) {
    throw ConfigError("evaluate: need one ground-truth image per camera");
  }
  const auto& mc = model.config();
  const double points = static_cast<double>(stream.header.original_points);
  if (points <= 0) throw ConsistencyError("evaluate: stream has no points");
  RDReport rep;
  rep.meta = {{"ground_truth", "synthetic reference renders (not comparable to published absolute numbers)"},
              {"views", cams.size()},
              {"lpips", nullptr},
              {"model_hash", model.hash()}};
  const int top = std::min(mc.m_max, stream.top_level());
  for (int m = mc.m_min; m <= top; ++m) {
    RDRow row;
    row.lambda = cfg.lambda;
    row.level = m;
    row.bpp_geometry = 8.0 * static_cast<double>(stream.geometry_bytes()) / points;
    double feature_bytes = 0.0;
    for (int n = mc.base_level; n <= m; ++n) {
      const double b = 8.0 * static_cast<double>(stream.level_bytes(n)) / points;
      row.bpp_level[n] = b;
      feature_bytes += static_cast<double>(stream.level_bytes(n));
    }
    row.bpp_features = 8.0 * feature_bytes / points;
    row.bpp_total = 8.0 * (static_cast<double>(codec::kHeaderBytes + stream.geometry_bytes()) + feature_bytes) / points;

    // Untimed warmup, then the timed decode.
    auto t0 = std::chrono::steady_clock::now();
    net::DecodeResult dec = net::decode_pipeline(stream, model, m);
    if (cfg.timing) {
      t0 = std::chrono::steady_clock::now();
      dec = net::decode_pipeline(stream, model, m);
      row.decode_ms = ms_since(t0);
    }
    row.gaussians = dec.gaussians.size();
    double render_ms = 0.0;
    for (size_t v = 0; v < cams.size(); ++v) {
      const auto t1 = std::chrono::steady_clock::now();
      const Image img = splat::rasterize(dec.gaussians, cams[v]);
      render_ms += ms_since(t1);
      row.psnr += psnr(img, ground_truth[v]);
      row.ssim += ssim(img, ground_truth[v]);
      row.ms_ssim += ms_ssim(img, ground_truth[v]);
      if (!cfg.dump_views.empty()) {
        std::filesystem::create_directories(cfg.dump_views);
        splat::write_png(cfg.dump_views / ("M" + std::to_string(m) + "_view" + std::to_string(v) + ".png"), img);
      }
    }
    const double nv = static_cast<double>(cams.size());
    row.psnr /= nv;
    row.ssim /= nv;
    row.ms_ssim /= nv;
    row.render_ms = cfg.timing ? render_ms / nv : 0.0;
    rep.rows.push_back(row);
  }
  return rep;
}

std::string report_csv(const RDReport& r) {
  int lo = 1 << 30, hi = -1;
  for (const auto& row : r.rows) {
    for (const auto& [n, b] : row.bpp_level) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
  }
  std::ostringstream os;
  os.precision(10);
  os << "lambda,M,bpp_geometry";
  for (int n = lo; n <= hi; ++n) os << ",bpp_level" << n;
  os << ",bpp_features,bpp_total,psnr,ssim,ms_ssim,lpips,decode_ms,render_ms,gaussians\n";
  for (const auto& row : r.rows) {
    if (std::isnan(row.lambda)) {
      os << "";
    } else {
      os << row.lambda;
    }
    os << "," << row.level << "," << row.bpp_geometry;
    for (int n = lo; n <= hi; ++n) {
      os << ",";
      if (row.bpp_level.count(n)) os << row.bpp_level.at(n);
    }
    os << "," << row.bpp_features << "," << row.bpp_total << "," << row.psnr << "," << row.ssim << "," << row.ms_ssim
       << ",," << row.decode_ms << "," << row.render_ms << "," << row.gaussians << "\n";
  }
  return os.str();
}

nlohmann::json report_json(const RDReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [n, b] : row.bpp_level) levels[std::to_string(n)] = b;
    rows.push_back({{"lambda", std::isnan(row.lambda) ? nlohmann::json(nullptr) : nlohmann::json(row.lambda)},
                    {"M", row.level},
                    {"bpp_geometry", row.bpp_geometry},
                    {"bpp_level", levels},
                    {"bpp_features", row.bpp_features},
                    {"bpp_total", row.bpp_total},
                    {"psnr", row.psnr},
                    {"ssim", row.ssim},
                    {"ms_ssim", row.ms_ssim},
                    {"lpips", nullptr},
                    {"decode_ms", row.decode_ms},
                    {"render_ms", row.render_ms},
                    {"gaussians", row.gaussians}});
  }
  return {{"rows", rows}, {"meta", r.meta}};
}

}  // namespace b2p::metrics
