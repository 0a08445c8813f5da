#include "b2p/sparse/kernel_map.hpp"

#include <algorithm>
#include <string>

#include "b2p/error.hpp"
#include "b2p/voxel/morton.hpp"

namespace b2p::sparse {

std::vector<Coord> kernel_offsets(int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("kernel size must be odd and positive, got " + std::to_string(kernel_size));
  }
  const int half = (kernel_size - 1) / 2;
  std::vector<std::pair<uint64_t, Coord>> keyed;
  for (int z = 0; z < kernel_size; ++z)
    for (int y = 0; y < kernel_size; ++y)
      for (int x = 0; x < kernel_size; ++x)
        keyed.push_back({voxel::morton_key_unchecked({x, y, z}), Coord{x - half, y - half, z - half}});
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Coord> out;
  out.reserve(keyed.size());
  for (const auto& k : keyed) out.push_back(k.second);
  return out;
}

KernelMap build_kernel_map(std::span<const Coord> in_coords, std::span<const Coord> out_coords, int kernel_size) {
  KernelMap km;
  km.kernel_size = kernel_size;
  km.offsets = kernel_offsets(kernel_size);
  km.num_in = in_coords.size();
  km.num_out = out_coords.size();
  km.pairs.resize(km.offsets.size());

  std::vector<uint64_t> keys(in_coords.size());
  for (size_t i = 0; i < in_coords.size(); ++i) keys[i] = voxel::morton_key_unchecked(in_coords[i]);

  for (size_t o = 0; o < km.offsets.size(); ++o) {
    const Coord& d = km.offsets[o];
    auto& list = km.pairs[o];
    for (size_t b = 0; b < out_coords.size(); ++b) {
      const Coord q{out_coords[b][0] + d[0], out_coords[b][1] + d[1], out_coords[b][2] + d[2]};
      if (q[0] < 0 || q[1] < 0 || q[2] < 0) continue;
      const uint64_t k = voxel::morton_key_unchecked(q);
      auto it = std::lower_bound(keys.begin(), keys.end(), k);
      if (it != keys.end() && *it == k) {
        list.push_back({static_cast<int32_t>(it - keys.begin()), static_cast<int32_t>(b)});
      }
    }
  }

  km.pair_begin.resize(km.offsets.size() + 1, 0);
  for (size_t o = 0; o < km.offsets.size(); ++o) {
    km.pair_begin[o + 1] = km.pair_begin[o] + static_cast<int32_t>(km.pairs[o].size());
  }

  // CSR by output and by input; offsets are visited in ascending order so
  // each row's entry list is offset-sorted.
  km.out_ptr.assign(km.num_out + 1, 0);
  km.in_ptr.assign(km.num_in + 1, 0);
  for (const auto& list : km.pairs) {
    for (const auto& [a, b] : list) {
      ++km.out_ptr[b + 1];
      ++km.in_ptr[a + 1];
    }
  }
  for (size_t i = 0; i < km.num_out; ++i) km.out_ptr[i + 1] += km.out_ptr[i];
  for (size_t i = 0; i < km.num_in; ++i) km.in_ptr[i + 1] += km.in_ptr[i];
  km.out_entries.resize(km.total_pairs());
  km.in_entries.resize(km.total_pairs());
  std::vector<int32_t> out_fill(km.out_ptr.begin(), km.out_ptr.end() - 1);
  std::vector<int32_t> in_fill(km.in_ptr.begin(), km.in_ptr.end() - 1);
  for (size_t o = 0; o < km.pairs.size(); ++o) {
    for (size_t j = 0; j < km.pairs[o].size(); ++j) {
      const auto [a, b] = km.pairs[o][j];
      const KernelMap::Entry e{static_cast<int32_t>(o), km.pair_begin[o] + static_cast<int32_t>(j)};
      km.out_entries[out_fill[b]++] = e;
      km.in_entries[in_fill[a]++] = e;
    }
  }
  return km;
}

}  // namespace b2p::sparse
