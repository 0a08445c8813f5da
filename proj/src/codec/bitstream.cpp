#include "b2p/codec/bitstream.hpp"

#include <cstring>
#include <string>

#include <zlib.h>

#include "b2p/error.hpp"

namespace b2p::codec {
namespace {

void put_u8(std::vector<uint8_t>& out, uint32_t v) { out.push_back(static_cast<uint8_t>(v)); }
void put_u16(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_le(std::span<const uint8_t> b, size_t pos, int n) {
  uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(b[pos + i]) << (8 * i);
  return v;
}

uint32_t checked_size(size_t n, const char* what) {
  if (n > 0xFFFFFFFFu) throw RangeError(std::string(what) + " exceeds 4 GiB");
  return static_cast<uint32_t>(n);
}

std::string level_name(int level) { return "level-" + std::to_string(level) + " chunk"; }

}  // namespace

uint32_t crc32(std::span<const uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  size_t pos = 0;
  while (pos < bytes.size()) {
    const uInt n = static_cast<uInt>(std::min<size_t>(bytes.size() - pos, 1u << 30));
    c = ::crc32(c, bytes.data() + pos, n);
    pos += n;
  }
  return static_cast<uint32_t>(c);
}

const LevelChunk& LayeredBitstream::level(int n) const {
  if (n < header.base_level || n > top_level()) {
    throw LevelUnavailableError("level " + std::to_string(n) + " unavailable (stream has " +
                                std::to_string(header.base_level) + ".." + std::to_string(top_level()) + ")");
  }
  return levels[static_cast<size_t>(n - header.base_level)];
}

std::vector<uint8_t> serialize(const LayeredBitstream& s) {
  const auto& h = s.header;
  if (h.depth < 1 || h.depth > 255 || h.base_level < 0 || h.base_level > h.m_max || h.m_max > h.depth ||
      h.channels < 1 || h.channels > 255) {
    throw ConfigError("bitstream: inconsistent header levels");
  }
  std::vector<uint8_t> out;
  out.insert(out.end(), kStreamMagic, kStreamMagic + 4);
  put_u16(out, h.version);
  put_u8(out, static_cast<uint32_t>(h.depth));
  put_u8(out, static_cast<uint32_t>(h.base_level));
  put_u8(out, static_cast<uint32_t>(h.m_max));
  put_u8(out, static_cast<uint32_t>(h.channels));
  put_u16(out, 0);
  put_u64(out, h.model_hash);
  put_u32(out, h.original_points);

  put_u32(out, checked_size(s.geometry.size(), "geometry chunk"));
  put_u32(out, crc32(s.geometry));
  out.insert(out.end(), s.geometry.begin(), s.geometry.end());

  for (size_t i = 0; i < s.levels.size(); ++i) {
    const LevelChunk& c = s.levels[i];
    if (c.level != h.base_level + static_cast<int>(i) || c.level > h.m_max) {
      throw ConfigError("bitstream: level chunks must be consecutive from L up to M_max");
    }
    put_u8(out, static_cast<uint32_t>(c.level));
    put_u32(out, c.num_points);
    put_u32(out, checked_size(c.payload.size(), "level chunk"));
    put_u32(out, crc32(c.payload));
    out.insert(out.end(), c.payload.begin(), c.payload.end());
  }
  return out;
}

LayeredBitstream deserialize(std::span<const uint8_t> b) {
  if (b.size() < 4 || std::memcmp(b.data(), kStreamMagic, 4) != 0) throw FormatError("bitstream: bad magic");
  if (b.size() < kHeaderBytes) throw TruncationError("bitstream: truncated header", -1);
  LayeredBitstream s;
  auto& h = s.header;
  h.version = static_cast<uint16_t>(get_le(b, 4, 2));
  if (h.version != kStreamVersion) throw FormatError("bitstream: unsupported version " + std::to_string(h.version));
  h.depth = b[6];
  h.base_level = b[7];
  h.m_max = b[8];
  h.channels = b[9];
  h.model_hash = get_le(b, 12, 8);
  h.original_points = static_cast<uint32_t>(get_le(b, 20, 4));
  if (h.depth < 1 || h.base_level > h.m_max || h.m_max > h.depth || h.channels < 1) {
    throw FormatError("bitstream: inconsistent header levels");
  }

  size_t pos = kHeaderBytes;
  if (b.size() - pos < kGeometryChunkOverhead) throw TruncationError("bitstream: truncated geometry chunk", -1);
  const size_t glen = get_le(b, pos, 4);
  const uint32_t gcrc = static_cast<uint32_t>(get_le(b, pos + 4, 4));
  pos += kGeometryChunkOverhead;
  if (b.size() - pos < glen) throw TruncationError("bitstream: truncated geometry chunk", -1);
  s.geometry.assign(b.begin() + pos, b.begin() + pos + glen);
  if (crc32(s.geometry) != gcrc) throw ChecksumError("bitstream: geometry checksum mismatch");
  pos += glen;

  while (pos < b.size()) {
    const int expect = h.base_level + static_cast<int>(s.levels.size());
    if (b.size() - pos < kLevelChunkOverhead) {
      throw TruncationError("bitstream: truncated " + level_name(expect) + " header", expect);
    }
    LevelChunk c;
    c.level = b[pos];
    if (c.level != expect || c.level > h.m_max) {
      throw FormatError("bitstream: found " + level_name(c.level) + " where level " + std::to_string(expect) +
                        " was expected");
    }
    c.num_points = static_cast<uint32_t>(get_le(b, pos + 1, 4));
    const size_t len = get_le(b, pos + 5, 4);
    const uint32_t crc = static_cast<uint32_t>(get_le(b, pos + 9, 4));
    pos += kLevelChunkOverhead;
    if (b.size() - pos < len) throw TruncationError("bitstream: truncated " + level_name(c.level), c.level);
    c.payload.assign(b.begin() + pos, b.begin() + pos + len);
    if (crc32(c.payload) != crc) throw ChecksumError("bitstream: checksum mismatch in " + level_name(c.level));
    pos += len;
    s.levels.push_back(std::move(c));
  }
  return s;
}

}  // namespace b2p::codec
