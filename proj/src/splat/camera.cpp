#include "b2p/splat/camera.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "b2p/error.hpp"

namespace b2p::splat {
namespace {

Eigen::Vector3d vec(const Vec3& v) { return {v[0], v[1], v[2]}; }

}  // namespace

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width, int height) {
  const Eigen::Vector3d e = vec(eye);
  const Eigen::Vector3d f = (vec(target) - e).normalized();
  const Eigen::Vector3d right = f.cross(vec(up));
  if (right.norm() < 1e-12) throw ConfigError("look_at: view direction parallel to up");
  const Eigen::Vector3d r = right.normalized();
  const Eigen::Vector3d d = f.cross(r);
  Camera c;
  c.R.row(0) = r.transpose();
  c.R.row(1) = d.transpose();
  c.R.row(2) = f.transpose();
  c.t = -c.R * e;
  c.fx = c.fy = focal;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  return c;
}

Eigen::Vector3d camera_center(const Camera& cam) { return -cam.R.transpose() * cam.t; }

Eigen::Vector3d forward_axis(const Camera& cam) { return cam.R.row(2).transpose(); }

Projection project(const Vec3& mean, const Camera& cam) {
  Projection p;
  p.cam = cam.R * vec(mean) + cam.t;
  const double x = p.cam.x(), y = p.cam.y(), z = p.cam.z();
  p.depth = z;
  if (!(z > cam.near_plane)) return p;
  p.visible = true;
  p.screen = {cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy};
  p.J << cam.fx / z, 0.0, -cam.fx * x / (z * z),  //
      0.0, cam.fy / z, -cam.fy * y / (z * z);
  return p;
}

ScreenCov screen_cov(const Mat3& sigma, const Camera& cam, const Eigen::Matrix<double, 2, 3>& J) {
  const Eigen::Matrix<double, 2, 3> T = J * cam.R;
  ScreenCov s;
  s.cov = T * sigma * T.transpose();
  s.cov(1, 0) = s.cov(0, 1);
  const double a = s.cov(0, 0), b = s.cov(0, 1), c = s.cov(1, 1);
  const double lambda_min = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  if (lambda_min < kScreenCovFloor) {
    s.cov(0, 0) += kScreenCovFloor;
    s.cov(1, 1) += kScreenCovFloor;
    s.regularized = true;
  }
  return s;
}

}  // namespace b2p::splat
