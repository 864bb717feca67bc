#include "nsx/entropy/range_coder.hpp"

#include <algorithm>
#include <string>

namespace nsx {

namespace {
constexpr std::uint64_t kWindow = std::uint64_t{1} << 48;
constexpr std::uint64_t kMask = kWindow - 1;
constexpr std::uint64_t kBot = std::uint64_t{1} << 40;
constexpr std::uint64_t kLowBits = kBot - 1;
}  // namespace

void RangeEncoder::encode(const QuantizedCdf& cdf, std::int32_t symbol) {
  if (!cdf.contains(symbol)) {
    throw EntropyError("range coder: symbol " + std::to_string(symbol) + " outside support [" +
                       std::to_string(cdf.lo()) + ", " + std::to_string(cdf.hi()) + "]");
  }
  const auto i = static_cast<std::size_t>(symbol - cdf.offset);
  encode_interval(cdf.cdf[i], cdf.freq(i));
}

void RangeEncoder::encode_interval(std::uint32_t cum, std::uint32_t freq) {
  const std::uint64_t r = range_ >> kCdfPrecision;
  low_ += cum * r;
  range_ = freq * r;
  while (range_ < kBot) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  const bool top_is_ff = ((low_ >> 40) & 0xFF) == 0xFF && low_ < kWindow;
  if (!top_is_ff) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 48);
    std::uint8_t byte = cache_;
    for (; pending_ > 0; --pending_) {
      out_.push_back(static_cast<std::uint8_t>(byte + carry));
      byte = 0xFF;
    }
    cache_ = static_cast<std::uint8_t>(low_ >> 40);
  }
  ++pending_;
  low_ = (low_ & kLowBits) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  // range >= 2^40, so rounding low up to a multiple of 2^40 stays inside the
  // interval and leaves a single significant byte (plus a possible carry).
  low_ = (low_ + kLowBits) & ~kLowBits;
  shift_low();
  shift_low();
  // The first byte is the initial empty cache; the value coded is below 1, so
  // no carry ever reaches it.
  std::vector<std::uint8_t> out(out_.begin() + 1, out_.end());
  while (!out.empty() && out.back() == 0) out.pop_back();
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  for (int i = 0; i < 6; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() { return pos_ < in_.size() ? in_[pos_++] : 0; }

std::int32_t RangeDecoder::decode(const QuantizedCdf& cdf) {
  if (cdf.size() == 0) throw EntropyError("range coder: empty table");
  const std::uint64_t r = range_ >> kCdfPrecision;
  const std::uint64_t value = std::min<std::uint64_t>(code_ / r, kCdfTotal - 1);
  const auto it = std::upper_bound(cdf.cdf.begin() + 1, cdf.cdf.end(), static_cast<std::uint32_t>(value));
  const auto i = static_cast<std::size_t>(it - cdf.cdf.begin()) - 1;
  code_ = (code_ - cdf.cdf[i] * r) & kMask;
  range_ = cdf.freq(i) * r;
  while (range_ < kBot) {
    code_ = ((code_ << 8) | next_byte()) & kMask;
    range_ <<= 8;
  }
  return cdf.offset + static_cast<std::int32_t>(i);
}

std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const QuantizedCdf> cdfs) {
  if (symbols.size() != cdfs.size()) throw EntropyError("range coder: one table per symbol required");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(cdfs[i], symbols[i]);
  return enc.finish();
}

std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const QuantizedCdf> cdfs) {
  RangeDecoder dec(bytes);
  std::vector<std::int32_t> out;
  out.reserve(cdfs.size());
  for (const auto& cdf : cdfs) out.push_back(dec.decode(cdf));
  return out;
}

}  // namespace nsx
