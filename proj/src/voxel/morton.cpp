#include "b2p/voxel/morton.hpp"

#include <string>

#include "b2p/error.hpp"

namespace b2p::voxel {
namespace {

// Spreads the low 21 bits of v so that bit i lands on bit 3i.
uint64_t spread3(uint64_t v) {
  v &= 0x1FFFFFull;
  v = (v | v << 32) & 0x1F00000000FFFFull;
  v = (v | v << 16) & 0x1F0000FF0000FFull;
  v = (v | v << 8) & 0x100F00F00F00F00Full;
  v = (v | v << 4) & 0x10C30C30C30C30C3ull;
  v = (v | v << 2) & 0x1249249249249249ull;
  return v;
}

uint64_t compact3(uint64_t v) {
  v &= 0x1249249249249249ull;
  v = (v ^ (v >> 2)) & 0x10C30C30C30C30C3ull;
  v = (v ^ (v >> 4)) & 0x100F00F00F00F00Full;
  v = (v ^ (v >> 8)) & 0x1F0000FF0000FFull;
  v = (v ^ (v >> 16)) & 0x1F00000000FFFFull;
  v = (v ^ (v >> 32)) & 0x1FFFFFull;
  return v;
}

}  // namespace

uint64_t morton_key_unchecked(const Coord& c) {
  return spread3(static_cast<uint64_t>(c[0])) | spread3(static_cast<uint64_t>(c[1])) << 1 |
         spread3(static_cast<uint64_t>(c[2])) << 2;
}

uint64_t morton_key(const Coord& c, int bits) {
  if (bits < 0 || bits > kMaxMortonBits) {
    throw RangeError("morton_key: bit depth " + std::to_string(bits) + " outside [0, 21]");
  }
  const int64_t limit = int64_t{1} << bits;
  for (int a = 0; a < 3; ++a) {
    if (c[a] < 0 || c[a] >= limit) {
      throw RangeError("morton_key: component " + std::to_string(a) + " = " + std::to_string(c[a]) +
                       " does not fit in " + std::to_string(bits) + " bits");
    }
  }
  return morton_key_unchecked(c);
}

Coord morton_decode(uint64_t key) {
  return {static_cast<int32_t>(compact3(key)), static_cast<int32_t>(compact3(key >> 1)),
          static_cast<int32_t>(compact3(key >> 2))};
}

}  // namespace b2p::voxel
