#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "b2p/sparse/params.hpp"

namespace b2p::net {

struct ModelConfig {
  int depth = 10;      // N
  int base_level = 7;  // L
  int m_min = 8;
  int m_max = 9;
  int channels = 64;
  int squeezed = 8;
  int in_channels = 3;

  // Throws ConfigError unless 1 <= L <= M_min <= M_max <= N and widths are valid.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

enum class GenMode { kGenerative, kDirect };

// Generative (8 sub-points per voxel) iff m <= N - 2.
GenMode mode_for(int m, int depth);
const char* mode_name(GenMode mode);

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;  // 0 for biases
};

// Every tensor of a model in store order. Conv weights are
// [offsets, C_in, C_out], per-point layers [C_in, C_out], biases [C_out].
std::vector<TensorSpec> model_layout(const ModelConfig& cfg);

// Levels that own a Feature Convert stage: N (from RGB) and L..M_max.
std::vector<int> convert_levels(const ModelConfig& cfg);

class B2PModel {
 public:
  B2PModel() = default;
  // Audits `params` against the layout.
  B2PModel(ModelConfig cfg, sparse::ParamStore params, nlohmann::json meta = nlohmann::json::object());

  // Uniform fan-in scaled weights U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
  // zero biases, all rounded to float32.
  static B2PModel initialize(const ModelConfig& cfg, uint64_t seed);
  static B2PModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const { return cfg_; }
  const sparse::ParamStore& params() const { return params_; }
  sparse::ParamStore& params() { return params_; }
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  // Hash of the checkpoint manifest this model saves as.
  uint64_t hash() const;

 private:
  ModelConfig cfg_;
  sparse::ParamStore params_;
  nlohmann::json meta_ = nlohmann::json::object();
};

// Throws ConfigError naming the first tensor that is missing, extra, out of
// order or of the wrong shape.
void audit(const ModelConfig& cfg, const sparse::ParamStore& params);

}  // namespace b2p::net
