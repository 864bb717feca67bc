#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nsx/entropy/cdf.hpp"

namespace nsx {

/// Range coder with a 48-bit window and 16-bit probabilities.
///
/// range stays in [2^40, 2^48) between symbols. Carries out of the window
/// are resolved through one cached byte plus a run of pending 0xFF bytes, so
/// no interval is ever shrunk to avoid a carry. finish() writes the shortest
/// tail that pins the final interval; trailing zero bytes are dropped.
class RangeEncoder {
 public:
  void encode(const QuantizedCdf& cdf, std::int32_t symbol);
  void encode_interval(std::uint32_t cum, std::uint32_t freq);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;  // bit 48 is the pending carry
  std::uint64_t range_ = (std::uint64_t{1} << 48) - 1;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;  // cache byte plus queued 0xFF bytes
  std::vector<std::uint8_t> out_;
};

/// Mirror of RangeEncoder. Reads past the end of the input as zero bytes,
/// so any byte string decodes to some symbol sequence without faulting.
class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  std::int32_t decode(const QuantizedCdf& cdf);

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint64_t range_ = (std::uint64_t{1} << 48) - 1;
  std::uint64_t code_ = 0;
};

std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const QuantizedCdf> cdfs);
std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const QuantizedCdf> cdfs);

}  // namespace nsx
