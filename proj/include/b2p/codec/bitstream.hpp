#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace b2p::codec {

inline constexpr char kStreamMagic[4] = {'B', '2', 'P', '1'};
inline constexpr uint16_t kStreamVersion = 1;
inline constexpr size_t kHeaderBytes = 24;
inline constexpr size_t kGeometryChunkOverhead = 8;  // length, crc
inline constexpr size_t kLevelChunkOverhead = 13;    // level, points, length, crc

// Little-endian header layout:
//   0  magic "B2P1"      4  u16 version     6  u8 N        7  u8 L
//   8  u8 M_max          9  u8 channels    10  u16 reserved
//  12  u64 model hash   20  u32 original point count
struct StreamHeader {
  uint16_t version = kStreamVersion;
  int depth = 0;
  int base_level = 0;
  int m_max = 0;
  int channels = 8;
  uint64_t model_hash = 0;
  uint32_t original_points = 0;
};

struct LevelChunk {
  int level = 0;
  uint32_t num_points = 0;
  std::vector<uint8_t> payload;
};

struct LayeredBitstream {
  StreamHeader header;
  std::vector<uint8_t> geometry;
  std::vector<LevelChunk> levels;  // consecutive from header.base_level

  // Highest level whose features are present (base_level - 1 if none).
  int top_level() const { return header.base_level + static_cast<int>(levels.size()) - 1; }
  const LevelChunk& level(int n) const;
  size_t geometry_bytes() const { return kGeometryChunkOverhead + geometry.size(); }
  size_t level_bytes(int n) const { return kLevelChunkOverhead + level(n).payload.size(); }
};

std::vector<uint8_t> serialize(const LayeredBitstream& stream);
// A stream cut at a chunk boundary parses with fewer levels. Throws
// FormatError on bad magic, version, layout or checksum, and
// TruncationError when a chunk is cut short (level -1 for geometry).
LayeredBitstream deserialize(std::span<const uint8_t> bytes);

uint32_t crc32(std::span<const uint8_t> bytes);

}  // namespace b2p::codec
