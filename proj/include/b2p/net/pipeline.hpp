#pragma once

#include <map>
#include <vector>

#include "b2p/codec/bitstream.hpp"
#include "b2p/net/model.hpp"
#include "b2p/splat/gaussian.hpp"
#include "b2p/voxel/hierarchy.hpp"
#include "b2p/voxel/point_cloud.hpp"

namespace b2p::net {

struct LevelReport {
  int level = 0;
  size_t points = 0;
  size_t symbols = 0;
  size_t clamped = 0;         // symbols clamped into the alphabet
  size_t payload_bytes = 0;
  double estimate_bits = 0.0;  // sum of -log2 of the Gaussian bin mass
};

struct EncodeResult {
  codec::LayeredBitstream stream;
  std::vector<LevelReport> levels;
  std::map<int, Matrix> recon;  // encoder-side reconstructions
};

// Codes levels L..top (top <= M_max of the model). The cloud's bit depth
// must equal the model's N.
EncodeResult encode_pipeline(const voxel::PointCloud& pc, const B2PModel& model, int top);
inline EncodeResult encode_pipeline(const voxel::PointCloud& pc, const B2PModel& model) {
  return encode_pipeline(pc, model, model.config().m_max);
}

struct DecodeResult {
  int level = 0;
  std::vector<splat::Gaussian3D> gaussians;
  std::map<int, Matrix> recon;  // decoder-side reconstructions
};

// Throws IncompatibleError on a model hash mismatch, LevelUnavailableError
// when m is outside [L, stream top] or has no generation head, and
// ConsistencyError when a chunk's point count disagrees with the geometry.
DecodeResult decode_pipeline(const codec::LayeredBitstream& stream, const B2PModel& model, int m);

// Level-N colors as an n x 3 matrix.
Matrix color_matrix(const voxel::PointCloud& pc);

}  // namespace b2p::net
