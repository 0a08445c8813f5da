#include "b2p/net/pipeline.hpp"

#include <string>

#include "b2p/codec/gaussian_model.hpp"
#include "b2p/codec/geometry.hpp"
#include "b2p/codec/range_coder.hpp"
#include "b2p/error.hpp"
#include "b2p/net/network.hpp"

namespace b2p::net {

Matrix color_matrix(const voxel::PointCloud& pc) {
  Matrix m(static_cast<Eigen::Index>(pc.size()), 3);
  for (size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), k) = pc.colors[i][k];
  }
  return m;
}

EncodeResult encode_pipeline(const voxel::PointCloud& pc, const B2PModel& model, int top) {
  const ModelConfig& cfg = model.config();
  if (pc.bit_depth != cfg.depth) {
    throw ConfigError("encode: cloud bit depth " + std::to_string(pc.bit_depth) + " differs from model N=" +
                      std::to_string(cfg.depth));
  }
  if (top < cfg.base_level || top > cfg.m_max) {
    throw ConfigError("encode: top level " + std::to_string(top) + " outside [" + std::to_string(cfg.base_level) +
                      ", " + std::to_string(cfg.m_max) + "]");
  }
  if (pc.size() > UINT32_MAX) throw RangeError("encode: too many points");
  const voxel::OctreeHierarchy hier = voxel::build_hierarchy(pc, cfg.base_level);
  LevelMaps maps(hier);
  ad::Tape t(false);
  Network net(t, model, maps);

  EncodeResult res;
  auto& hdr = res.stream.header;
  hdr.depth = cfg.depth;
  hdr.base_level = cfg.base_level;
  hdr.m_max = cfg.m_max;
  hdr.channels = cfg.squeezed;
  hdr.model_hash = model.hash();
  hdr.original_points = static_cast<uint32_t>(pc.size());
  res.stream.geometry = codec::encode_geometry(pc.points, cfg.depth);

  const auto feats = net.extract(t.constant(color_matrix(pc)));
  std::map<int, ad::Var> recon;
  for (int n = cfg.base_level; n <= top; ++n) {
    const ad::Var ctx = net.context(n, recon);
    const Matrix y = t.value(net.squeeze(n, feats.at(n), ctx));
    const auto ep = net.entropy(n, ctx);
    const Matrix mu = t.value(ep.mu);
    const Matrix sigma = t.value(ep.sigma);

    LevelReport rep;
    rep.level = n;
    rep.points = hier.size(n);
    rep.symbols = static_cast<size_t>(y.size());
    Matrix q(y.rows(), y.cols());
    std::vector<int> symbols(static_cast<size_t>(y.size()));
    codec::RangeEncoder enc;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const codec::Quantized qv = codec::quantize(y.data()[i]);
      rep.clamped += qv.clamped ? 1 : 0;
      symbols[static_cast<size_t>(i)] = qv.value;
      q.data()[i] = qv.value;
      enc.encode_symbol(qv.value, codec::build_cdf_table(mu.data()[i], sigma.data()[i]));
    }
    rep.estimate_bits = codec::estimate_bits(symbols, std::span<const double>(mu.data(), static_cast<size_t>(mu.size())),
                                             std::span<const double>(sigma.data(), static_cast<size_t>(sigma.size())));
    codec::LevelChunk chunk;
    chunk.level = n;
    chunk.num_points = static_cast<uint32_t>(hier.size(n));
    chunk.payload = enc.finish();
    rep.payload_bytes = chunk.payload.size();
    res.stream.levels.push_back(std::move(chunk));
    res.levels.push_back(rep);

    recon[n] = net.reconstruct(n, t.constant(std::move(q)), ctx);
    res.recon[n] = t.value(recon[n]);
  }
  return res;
}

DecodeResult decode_pipeline(const codec::LayeredBitstream& stream, const B2PModel& model, int m) {
  const ModelConfig& cfg = model.config();
  const auto& hdr = stream.header;
  if (hdr.model_hash != model.hash()) {
    throw IncompatibleError("decode: stream was encoded with a different model (hash mismatch)");
  }
  if (hdr.depth != cfg.depth || hdr.base_level != cfg.base_level || hdr.m_max != cfg.m_max ||
      hdr.channels != cfg.squeezed) {
    throw IncompatibleError("decode: stream header does not match the model configuration");
  }
  if (m < cfg.base_level || m > stream.top_level()) {
    throw LevelUnavailableError("level unavailable: " + std::to_string(m) + " (stream has levels " +
                                std::to_string(cfg.base_level) + ".." + std::to_string(stream.top_level()) + ")");
  }
  if (m < cfg.m_min) {
    throw LevelUnavailableError("level unavailable: no Gaussian generation head for level " + std::to_string(m));
  }
  const voxel::OctreeHierarchy hier = codec::decode_geometry(stream.geometry, cfg.depth, cfg.base_level);
  LevelMaps maps(hier);
  ad::Tape t(false);
  Network net(t, model, maps);

  DecodeResult res;
  res.level = m;
  std::map<int, ad::Var> recon;
  for (int n = cfg.base_level; n <= m; ++n) {
    const codec::LevelChunk& chunk = stream.level(n);
    if (chunk.num_points != hier.size(n)) {
      throw ConsistencyError("decode: level " + std::to_string(n) + " chunk has " + std::to_string(chunk.num_points) +
                             " points, geometry has " + std::to_string(hier.size(n)));
    }
    const ad::Var ctx = net.context(n, recon);
    const auto ep = net.entropy(n, ctx);
    const Matrix mu = t.value(ep.mu);
    const Matrix sigma = t.value(ep.sigma);
    Matrix q(mu.rows(), mu.cols());
    codec::RangeDecoder dec(chunk.payload);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      q.data()[i] = dec.decode_symbol(codec::build_cdf_table(mu.data()[i], sigma.data()[i]));
    }
    recon[n] = net.reconstruct(n, t.constant(std::move(q)), ctx);
    res.recon[n] = t.value(recon[n]);
  }
  res.gaussians = splat::from_matrix(t.value(net.generate(m, recon.at(m))));
  return res;
}

}  // namespace b2p::net
