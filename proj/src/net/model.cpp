#include "b2p/net/model.hpp"

#include <cmath>

#include "b2p/error.hpp"
#include "b2p/rng.hpp"

namespace b2p::net {
namespace {

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

class Layout {
 public:
  void conv(const std::string& name, int offsets, int cin, int cout) {
    specs.push_back({name + ".w", {offsets, cin, cout}, offsets * cin});
    specs.push_back({name + ".b", {cout}, 0});
  }
  void linear(const std::string& name, int cin, int cout) {
    specs.push_back({name + ".w", {cin, cout}, cin});
    specs.push_back({name + ".b", {cout}, 0});
  }
  void inception(const std::string& name, int c) {
    conv(name + ".a1", 27, c, c / 4);
    conv(name + ".a2", 27, c / 4, c / 2);
    conv(name + ".b1", 27, c, c / 4);
    linear(name + ".b2", c / 4, c / 4);
    conv(name + ".b3", 27, c / 4, c / 2);
  }
  void res(const std::string& name, int c) {
    conv(name + ".c1", 27, c, c);
    conv(name + ".c2", 27, c, c);
  }
  std::vector<TensorSpec> specs;
};

}  // namespace

void ModelConfig::validate() const {
  if (depth < 1 || depth > 21) throw ConfigError("model: depth N=" + std::to_string(depth) + " outside [1, 21]");
  if (!(1 <= base_level && base_level <= m_min && m_min <= m_max && m_max <= depth)) {
    throw ConfigError("model: levels must satisfy 1 <= L <= M_min <= M_max <= N (got L=" + std::to_string(base_level) +
                      " M_min=" + std::to_string(m_min) + " M_max=" + std::to_string(m_max) +
                      " N=" + std::to_string(depth) + ")");
  }
  if (channels <= 0 || channels % 4 != 0) throw ConfigError("model: channels must be a positive multiple of 4");
  if (squeezed <= 0 || in_channels <= 0) throw ConfigError("model: channel widths must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"N", depth}, {"L", base_level}, {"M_min", m_min}, {"M_max", m_max},
          {"channels", channels}, {"squeezed", squeezed}, {"in_channels", in_channels}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.depth = j.at("N").get<int>();
    c.base_level = j.at("L").get<int>();
    c.m_min = j.at("M_min").get<int>();
    c.m_max = j.at("M_max").get<int>();
    c.channels = j.at("channels").get<int>();
    c.squeezed = j.at("squeezed").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

GenMode mode_for(int m, int depth) { return m <= depth - 2 ? GenMode::kGenerative : GenMode::kDirect; }

const char* mode_name(GenMode mode) { return mode == GenMode::kGenerative ? "generative" : "direct"; }

std::vector<int> convert_levels(const ModelConfig& cfg) {
  std::vector<int> out;
  for (int n = cfg.base_level; n <= cfg.m_max; ++n) out.push_back(n);
  if (cfg.m_max < cfg.depth) out.push_back(cfg.depth);
  return out;
}

std::vector<TensorSpec> model_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int c = cfg.channels, s = cfg.squeezed;
  Layout l;
  for (int n : convert_levels(cfg)) {
    const std::string p = "convert." + std::to_string(n);
    l.conv(p + ".l1", 27, n == cfg.depth ? cfg.in_channels : c, c);
    l.inception(p + ".l2", c);
    l.inception(p + ".l3", c);
    l.conv(p + ".l4", 27, c, c);
  }
  for (int n = cfg.base_level; n <= cfg.m_max; ++n) {
    const std::string lv = std::to_string(n);
    l.linear("squeeze." + lv + ".l1", 2 * c, c);
    l.linear("squeeze." + lv + ".l2", c, s);
    l.conv("entropy." + lv + ".l1", 27, c, c);
    l.inception("entropy." + lv + ".l2", c);
    l.inception("entropy." + lv + ".l3", c);
    l.linear("entropy." + lv + ".mu", c, s);
    l.linear("entropy." + lv + ".sigma", c, s);
    l.linear("reconstruct." + lv + ".l1", s + c, c);
    l.inception("reconstruct." + lv + ".l2", c);
    l.inception("reconstruct." + lv + ".l3", c);
    l.linear("reconstruct." + lv + ".l4", c, c);
  }
  for (int m = cfg.m_min; m <= cfg.m_max; ++m) {
    const std::string p = "generate." + std::to_string(m);
    l.conv(p + ".l1", 27, c, c);
    l.res(p + ".l2", c);
    l.res(p + ".l3", c);
    l.conv(p + ".l4", mode_for(m, cfg.depth) == GenMode::kGenerative ? 8 : 27, c, c);
    l.res(p + ".l5", c);
    l.res(p + ".l6", c);
    l.conv(p + ".l7", 27, c, 14);
  }
  return l.specs;
}

void audit(const ModelConfig& cfg, const sparse::ParamStore& params) {
  const auto specs = model_layout(cfg);
  if (params.size() != specs.size()) {
    throw ConfigError("model audit: " + std::to_string(params.size()) + " tensors, layout expects " +
                      std::to_string(specs.size()));
  }
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& e = params.at(i);
    if (e.name != specs[i].name) throw ConfigError("model audit: tensor " + std::to_string(i) + " is '" + e.name + "', expected '" + specs[i].name + "'");
    if (e.shape != specs[i].shape) {
      throw ConfigError("model audit: '" + e.name + "' has shape " + shape_str(e.shape) + ", expected " +
                        shape_str(specs[i].shape));
    }
    const auto& sh = specs[i].shape;
    Eigen::Index rows = 1;
    for (size_t k = 0; k + 1 < sh.size(); ++k) rows *= sh[k];
    if (e.value.rows() != rows || e.value.cols() != sh.back()) {
      throw ConfigError("model audit: '" + e.name + "' storage does not match its shape");
    }
  }
}

B2PModel::B2PModel(ModelConfig cfg, sparse::ParamStore params, nlohmann::json meta)
    : cfg_(cfg), params_(std::move(params)), meta_(std::move(meta)) {
  audit(cfg_, params_);
  meta_["model"] = cfg_.to_json();
}

B2PModel B2PModel::initialize(const ModelConfig& cfg, uint64_t seed) {
  const Rng root = Rng(seed).split("init");
  sparse::ParamStore store;
  for (const auto& s : model_layout(cfg)) {
    Eigen::Index rows = 1;
    for (size_t k = 0; k + 1 < s.shape.size(); ++k) rows *= s.shape[k];
    Matrix m = Matrix::Zero(rows, s.shape.back());
    if (s.fan_in > 0) {
      Rng rng = root.split(s.name);
      const double bound = std::sqrt(6.0 / s.fan_in);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    }
    store.add(s.name, s.shape, std::move(m));
  }
  store.round_to_float();
  nlohmann::json meta = {{"init_seed", seed}};
  return B2PModel(cfg, std::move(store), meta);
}

B2PModel B2PModel::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("model not found: " + path.string());
  sparse::Checkpoint ck = sparse::load_checkpoint(path);
  const auto& meta = ck.manifest.at("meta");
  if (!meta.contains("model")) throw FormatError("checkpoint has no model config");
  return B2PModel(ModelConfig::from_json(meta.at("model")), std::move(ck.params), meta);
}

void B2PModel::save(const std::filesystem::path& path) const { sparse::save_checkpoint(path, params_, meta_); }

uint64_t B2PModel::hash() const { return sparse::manifest_hash(sparse::build_manifest(params_, meta_)); }

}  // namespace b2p::net
