#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "b2p/codec/gaussian_model.hpp"

namespace b2p::codec {

// 32-bit range coder with byte renormalization and carry propagation
// (LZMA-style). Frequencies are out of kCdfTotal.
class RangeEncoder {
 public:
  void encode(uint32_t cum, uint32_t freq);
  void encode_symbol(int symbol, const CdfTable& cdf);
  // Flushes and returns the payload. The encoder is spent afterwards.
  std::vector<uint8_t> finish();

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool leading_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);
  // Throws FormatError if the payload cannot have been produced by the
  // encoder under this table.
  int decode_symbol(const CdfTable& cdf);

 private:
  uint8_t next_byte() { return pos_ < bytes_.size() ? bytes_[pos_++] : 0; }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

std::vector<uint8_t> range_encode(std::span<const int> symbols, std::span<const CdfTable> cdfs);
// Ideal code length, in bits, of the symbols under the integer tables.
double table_bits(std::span<const int> symbols, std::span<const CdfTable> cdfs);

std::vector<int> range_decode(std::span<const uint8_t> bytes, std::span<const CdfTable> cdfs);

}  // namespace b2p::codec
