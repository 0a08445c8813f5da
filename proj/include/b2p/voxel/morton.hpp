#pragma once

#include <cstdint>

#include "b2p/common.hpp"

namespace b2p::voxel {

// Largest bit depth whose interleaved key fits in 64 bits.
inline constexpr int kMaxMortonBits = 21;

// Bit-interleaved key; within each triplet x is the least significant bit,
// then y, then z. Throws RangeError if a component is negative or >= 2^bits.
uint64_t morton_key(const Coord& c, int bits);

// Inverse of morton_key (no range checks).
Coord morton_decode(uint64_t key);

// Key of a coordinate already known to be in range.
uint64_t morton_key_unchecked(const Coord& c);

}  // namespace b2p::voxel
