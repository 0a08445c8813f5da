#include "b2p/splat/gaussian.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "b2p/error.hpp"

namespace b2p::splat {

Mat3 quat_to_rot(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 covariance(const Vec3& scales, const Quat& q) {
  const Mat3 r = quat_to_rot(q);
  const Eigen::Vector3d s2(scales[0] * scales[0], scales[1] * scales[1], scales[2] * scales[2]);
  return r.transpose() * s2.asDiagonal() * r;
}

Matrix to_matrix(std::span<const Gaussian3D> g) {
  Matrix m(static_cast<Eigen::Index>(g.size()), kGaussianParams);
  for (size_t i = 0; i < g.size(); ++i) {
    const auto& p = g[i];
    m.row(i) << p.mean[0], p.mean[1], p.mean[2], p.scales[0], p.scales[1], p.scales[2], p.quat[0], p.quat[1],
        p.quat[2], p.quat[3], p.opacity, p.color[0], p.color[1], p.color[2];
  }
  return m;
}

std::vector<Gaussian3D> from_matrix(const Matrix& m) {
  if (m.cols() != kGaussianParams) throw DimensionError("gaussians: expected 14 columns");
  std::vector<Gaussian3D> g(static_cast<size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto& p = g[i];
    for (int k = 0; k < 3; ++k) {
      p.mean[k] = m(i, kColMean + k);
      p.scales[k] = m(i, kColScale + k);
      p.color[k] = m(i, kColColor + k);
    }
    for (int k = 0; k < 4; ++k) p.quat[k] = m(i, kColQuat + k);
    p.opacity = m(i, kColOpacity);
  }
  return g;
}

void save_gaussians(const std::filesystem::path& path, std::span<const Gaussian3D> g) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  const uint32_t n = static_cast<uint32_t>(g.size());
  f.write(reinterpret_cast<const char*>(&n), 4);
  const Matrix m = to_matrix(g);
  std::vector<float> row(kGaussianParams);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < kGaussianParams; ++k) row[k] = static_cast<float>(m(i, k));
    f.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * kGaussianParams);
  }
  if (!f) throw FormatError("write failed: " + path.string());
}

std::vector<Gaussian3D> load_gaussians(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  uint32_t n = 0;
  if (!f.read(reinterpret_cast<char*>(&n), 4)) throw FormatError("gaussian dump: missing count");
  Matrix m(n, kGaussianParams);
  std::vector<float> row(kGaussianParams);
  for (uint32_t i = 0; i < n; ++i) {
    if (!f.read(reinterpret_cast<char*>(row.data()), sizeof(float) * kGaussianParams)) {
      throw FormatError("gaussian dump: truncated at record " + std::to_string(i));
    }
    for (int k = 0; k < kGaussianParams; ++k) m(i, k) = row[k];
  }
  if (f.peek() != std::char_traits<char>::eof()) throw FormatError("gaussian dump: trailing bytes");
  return from_matrix(m);
}

std::vector<Gaussian3D> round_to_float(std::span<const Gaussian3D> g) {
  Matrix m = to_matrix(g);
  m = m.cast<float>().cast<double>();
  return from_matrix(m);
}

}  // namespace b2p::splat
