#include "b2p/codec/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "b2p/error.hpp"

namespace b2p::codec {
namespace {

constexpr uint32_t kTop = 1u << 24;

}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      const uint8_t byte = static_cast<uint8_t>(temp + carry);
      // The first byte is always zero; it is not stored.
      if (leading_) {
        leading_ = false;
      } else {
        out_.push_back(byte);
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

// The range is split at floor(range * cum / total) so the sub-intervals tile
// it exactly.
void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
  const uint64_t lo = (static_cast<uint64_t>(range_) * cum) >> kCdfBits;
  const uint64_t hi = (static_cast<uint64_t>(range_) * (cum + freq)) >> kCdfBits;
  low_ += lo;
  range_ = static_cast<uint32_t>(hi - lo);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_symbol(int symbol, const CdfTable& cdf) {
  if (symbol < kSymbolMin || symbol > kSymbolMax) {
    throw RangeError("range coder: symbol " + std::to_string(symbol) + " outside alphabet");
  }
  const int k = symbol - kSymbolMin;
  encode(cdf[k], cdf[k + 1] - cdf[k]);
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

int RangeDecoder::decode_symbol(const CdfTable& cdf) {
  if (code_ >= range_) throw FormatError("range coder: corrupt payload");
  // Largest k with floor(range * cdf[k] / total) <= code.
  const uint64_t v = ((static_cast<uint64_t>(code_) + 1) * kCdfTotal - 1) / range_;
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), v);
  const int k = static_cast<int>(it - cdf.begin()) - 1;
  const uint64_t lo = (static_cast<uint64_t>(range_) * cdf[k]) >> kCdfBits;
  const uint64_t hi = (static_cast<uint64_t>(range_) * cdf[k + 1]) >> kCdfBits;
  if (hi == lo) throw FormatError("range coder: corrupt payload");
  code_ -= static_cast<uint32_t>(lo);
  range_ = static_cast<uint32_t>(hi - lo);
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return kSymbolMin + k;
}

std::vector<uint8_t> range_encode(std::span<const int> symbols, std::span<const CdfTable> cdfs) {
  if (symbols.size() != cdfs.size()) throw DimensionError("range_encode: symbol/table count mismatch");
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(symbols[i], cdfs[i]);
  return enc.finish();
}

double table_bits(std::span<const int> symbols, std::span<const CdfTable> cdfs) {
  if (symbols.size() != cdfs.size()) throw DimensionError("table_bits: symbol/table count mismatch");
  double bits = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const int k = symbols[i] - kSymbolMin;
    bits -= std::log2(static_cast<double>(cdfs[i][k + 1] - cdfs[i][k]) / kCdfTotal);
  }
  return bits;
}

std::vector<int> range_decode(std::span<const uint8_t> bytes, std::span<const CdfTable> cdfs) {
  RangeDecoder dec(bytes);
  std::vector<int> out(cdfs.size());
  for (size_t i = 0; i < cdfs.size(); ++i) out[i] = dec.decode_symbol(cdfs[i]);
  return out;
}

}  // namespace b2p::codec
