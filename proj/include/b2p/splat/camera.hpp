#pragma once

#include <Eigen/Core>

#include "b2p/common.hpp"
#include "b2p/splat/gaussian.hpp"

namespace b2p::splat {

// Pinhole camera, x right, y down, z forward. A world point p maps to the
// camera point R p + t.
struct Camera {
  Mat3 R = Mat3::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  double near_plane = 0.01;
};

// Camera at `eye` looking at `target` with world `up` pointing up on screen.
// Principal point at the image center.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width, int height);

Eigen::Vector3d camera_center(const Camera& cam);
Eigen::Vector3d forward_axis(const Camera& cam);

struct Projection {
  bool visible = false;  // false when at or behind the near plane
  Eigen::Vector3d cam = Eigen::Vector3d::Zero();
  Eigen::Vector2d screen = Eigen::Vector2d::Zero();
  double depth = 0.0;
  Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
};

Projection project(const Vec3& mean, const Camera& cam);

inline constexpr double kScreenCovFloor = 0.3;

struct ScreenCov {
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  bool regularized = false;
};

// J R_c Sigma R_c^T J^T, plus kScreenCovFloor on the diagonal when the
// smaller eigenvalue is below it.
ScreenCov screen_cov(const Mat3& sigma, const Camera& cam, const Eigen::Matrix<double, 2, 3>& J);

}  // namespace b2p::splat
