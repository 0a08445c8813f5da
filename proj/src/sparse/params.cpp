#include "b2p/sparse/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "b2p/error.hpp"
#include "b2p/rng.hpp"

namespace b2p::sparse {
namespace {

constexpr char kMagic[8] = {'B', '2', 'P', 'C', 'K', 'P', 'T', '1'};

uint64_t payload_hash(const ParamStore& params) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& e : params) {
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      const float f = static_cast<float>(e.value.data()[i]);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&f), sizeof f), h);
    }
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

size_t ParamStore::add(const std::string& name, std::vector<int> shape, Matrix value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(shape), std::move(value)});
  return entries_.size() - 1;
}

size_t ParamStore::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& e : entries_) n += static_cast<size_t>(e.value.size());
  return n;
}

void ParamStore::round_to_float() {
  for (auto& e : entries_) {
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      e.value.data()[i] = static_cast<double>(static_cast<float>(e.value.data()[i]));
    }
  }
}

nlohmann::json build_manifest(const ParamStore& params, const nlohmann::json& metadata) {
  nlohmann::json tensors = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& e : params) {
    tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
    offset += static_cast<size_t>(e.value.size());
  }
  return {{"format", "b2p-checkpoint"},
          {"version", 1},
          {"dtype", "float32-le"},
          {"offset_order", kOffsetOrderTag},
          {"scalars", offset},
          {"payload_fnv64", hex64(payload_hash(params))},
          {"tensors", tensors},
          {"meta", metadata}};
}

uint64_t manifest_hash(const nlohmann::json& manifest) { return fnv1a64(manifest.dump()); }

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& metadata) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  const std::string text = build_manifest(params, metadata).dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const uint32_t len = static_cast<uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : params) {
    std::vector<float> buf(static_cast<size_t>(e.value.size()));
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(e.value.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw FormatError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("not a b2p checkpoint: " + path.string());
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw FormatError("truncated checkpoint manifest");

  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (ck.manifest.value("offset_order", "") != kOffsetOrderTag) {
    throw IncompatibleError("checkpoint uses an unknown kernel offset order");
  }
  ck.model_hash = fnv1a64(text);
  for (const auto& t : ck.manifest.at("tensors")) {
    const std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;
    if (shape.size() == 1) {
      cols = shape[0];
    } else if (!shape.empty()) {
      cols = shape.back();
      for (size_t k = 0; k + 1 < shape.size(); ++k) rows *= shape[k];
    }
    std::vector<float> buf(static_cast<size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError("truncated checkpoint payload at tensor '" + t.at("name").get<std::string>() + "'");
    Matrix m(rows, cols);
    for (size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i];
    ck.params.add(t.at("name").get<std::string>(), shape, std::move(m));
  }
  if (hex64(payload_hash(ck.params)) != ck.manifest.value("payload_fnv64", "")) {
    throw FormatError("checkpoint payload hash mismatch");
  }
  return ck;
}

}  // namespace b2p::sparse
