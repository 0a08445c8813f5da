#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "b2p/common.hpp"

namespace b2p::sparse {

// Tag recorded in manifests for the kernel-offset enumeration order.
inline constexpr const char* kOffsetOrderTag = "morton-xyz-centered";

// Ordered collection of named parameter tensors. The value is kept as a 2-D
// matrix; `shape` records the logical shape written to the manifest.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    Matrix value;
  };

  size_t add(const std::string& name, std::vector<int> shape, Matrix value);
  size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Entry& at(size_t i) { return entries_[i]; }
  const Entry& at(size_t i) const { return entries_[i]; }
  Matrix& value(size_t i) { return entries_[i].value; }
  const Matrix& value(size_t i) const { return entries_[i].value; }
  size_t size() const { return entries_.size(); }
  size_t scalar_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Rounds every value to float32 precision in place.
  void round_to_float();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// A checkpoint on disk: "B2PCKPT1", u32 manifest length, manifest JSON,
// then the float32 little-endian payload of every tensor in manifest order.
struct Checkpoint {
  ParamStore params;
  nlohmann::json manifest;
  uint64_t model_hash = 0;
};

// The manifest lists tensors (name, shape, offset) and a hash of the
// payload; `metadata` is stored under "meta".
nlohmann::json build_manifest(const ParamStore& params, const nlohmann::json& metadata);
uint64_t manifest_hash(const nlohmann::json& manifest);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace b2p::sparse
