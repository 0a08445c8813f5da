#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "b2p/codec/bitstream.hpp"
#include "b2p/image.hpp"
#include "b2p/net/model.hpp"
#include "b2p/splat/camera.hpp"
#include "b2p/splat/gaussian.hpp"
#include "b2p/voxel/point_cloud.hpp"

namespace b2p::metrics {

// Circle of cameras around a target, world z up.
struct ViewRig {
  Vec3 target{0, 0, 0};
  double radius = 1.0;  // horizontal distance to the target
  double height = 0.0;  // eye height above the target
  double focal = 1.0;
  int width = 64;
  int height_px = 64;
};

// Camera k sits at azimuth phase + 2 pi k / count, measured from the -y
// side (azimuth 0 is the front view), and looks at the target.
std::vector<splat::Camera> camera_circle(int count, const ViewRig& rig, double phase = 0.0);
splat::Camera circle_camera(double azimuth, const ViewRig& rig);

// Rig framing a cloud: target at the bounding-box center, distance 2.5x the
// bounding radius, elevation 0.2 of the distance, focal fitting the radius.
ViewRig fit_rig(const voxel::PointCloud& pc, int width, int height);
ViewRig fit_rig(std::span<const Vec3> centers, int width, int height);

// Ground-truth scene: one isotropic Gaussian (sigma = 0.5 voxel, opaque) per
// voxel, colored by the voxel.
std::vector<splat::Gaussian3D> reference_gaussians(const voxel::PointCloud& pc);

// Brute-force renders of the reference scene.
std::vector<Image> ground_truth_views(const voxel::PointCloud& pc, const std::vector<splat::Camera>& cams);

struct RDRow {
  double lambda = 0.0;  // NaN when unknown
  int level = 0;        // M
  double bpp_geometry = 0.0;
  std::map<int, double> bpp_level;  // feature bpp per coded level L..M
  double bpp_features = 0.0;
  double bpp_total = 0.0;  // header + geometry + features, per original point
  double psnr = 0.0, ssim = 0.0, ms_ssim = 0.0;
  std::optional<double> lpips;  // not computed
  double decode_ms = 0.0, render_ms = 0.0;
  size_t gaussians = 0;
};

struct RDReport {
  std::vector<RDRow> rows;
  nlohmann::json meta;
};

struct EvalConfig {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  int views = 12;
  bool timing = true;  // when false, timings are reported as 0 for reproducibility
  std::filesystem::path dump_views;  // PNG per view and level when set
};

// Decodes at every M in [M_min, min(M_max, stream top)], renders the circle
// and averages metrics over views in view order.
RDReport evaluate(const codec::LayeredBitstream& stream, const net::B2PModel& model,
                  const std::vector<splat::Camera>& cams, const std::vector<Image>& ground_truth,
                  const EvalConfig& cfg);

std::string report_csv(const RDReport& r);
nlohmann::json report_json(const RDReport& r);

}  // namespace b2p::metrics
