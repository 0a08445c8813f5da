#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace b2p {

// Row-major so that one row is one point's feature vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Coord = std::array<int32_t, 3>;
using Vec3 = std::array<double, 3>;

}  // namespace b2p
