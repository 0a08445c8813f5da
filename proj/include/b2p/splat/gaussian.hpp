#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "b2p/common.hpp"

namespace b2p::splat {

using Mat3 = Eigen::Matrix3d;
using Quat = std::array<double, 4>;  // (w, x, y, z)

// Row layout shared by parameter matrices, gradients and dump files.
inline constexpr int kGaussianParams = 14;
inline constexpr int kColMean = 0;
inline constexpr int kColScale = 3;
inline constexpr int kColQuat = 6;
inline constexpr int kColOpacity = 10;
inline constexpr int kColColor = 11;

struct Gaussian3D {
  Vec3 mean{0, 0, 0};
  Vec3 scales{1, 1, 1};
  Quat quat{1, 0, 0, 0};
  double opacity = 1.0;
  Vec3 color{0, 0, 0};
};

// Rotation of a unit quaternion; the formula is applied as is, without
// normalizing q.
Mat3 quat_to_rot(const Quat& q);

// Sigma = R^T diag(s^2) R.
Mat3 covariance(const Vec3& scales, const Quat& q);

Matrix to_matrix(std::span<const Gaussian3D> g);
std::vector<Gaussian3D> from_matrix(const Matrix& m);

// u32 count, then 14 little-endian float32 per Gaussian in row layout.
void save_gaussians(const std::filesystem::path& path, std::span<const Gaussian3D> g);
std::vector<Gaussian3D> load_gaussians(const std::filesystem::path& path);
// Rounds every parameter to float32, matching what a dump stores.
std::vector<Gaussian3D> round_to_float(std::span<const Gaussian3D> g);

}  // namespace b2p::splat
