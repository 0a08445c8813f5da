#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "b2p/common.hpp"

namespace b2p::sparse {

// Offsets of an odd K^3 kernel in canonical order: Morton order of
// (offset + (K-1)/2). Weight tensors are laid out in this order.
std::vector<Coord> kernel_offsets(int kernel_size);

// Precomputed (input, output) index pairs per kernel offset, plus CSR views
// grouped by output row and by input row. The CSR views list offsets in
// ascending order, which fixes the summation order of every reduction.
struct KernelMap {
  struct Entry {
    int32_t offset;  // index into offsets
    int32_t row;     // global pair row (index into the concatenated pair list)
  };

  int kernel_size = 0;
  std::vector<Coord> offsets;
  // pairs[i] holds (input_index, output_index) with in[a] == out[b] + offsets[i],
  // sorted by output index.
  std::vector<std::vector<std::pair<int32_t, int32_t>>> pairs;
  // Start of each offset's block inside the concatenated pair list.
  std::vector<int32_t> pair_begin;
  size_t num_in = 0;
  size_t num_out = 0;

  std::vector<int32_t> out_ptr;  // num_out + 1
  std::vector<Entry> out_entries;
  std::vector<int32_t> in_ptr;   // num_in + 1
  std::vector<Entry> in_entries;

  size_t total_pairs() const { return pair_begin.empty() ? 0 : static_cast<size_t>(pair_begin.back()); }
  size_t num_offsets() const { return offsets.size(); }
};

// Both coordinate lists must be Morton-sorted and unique. Throws ConfigError
// for an even kernel size.
KernelMap build_kernel_map(std::span<const Coord> in_coords, std::span<const Coord> out_coords, int kernel_size);

}  // namespace b2p::sparse
