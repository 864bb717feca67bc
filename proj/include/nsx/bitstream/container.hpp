#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsx {

inline constexpr std::uint16_t kContainerVersion = 1;

/// Inclusive symbol range of one substream's probability tables.
struct PlaneSupport {
  std::int16_t lo = 0;
  std::int16_t hi = 0;
  bool operator==(const PlaneSupport&) const = default;
};

struct ContainerHeader {
  std::uint16_t version = kContainerVersion;
  std::uint16_t model_id = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t n = 0;
  std::uint16_t m = 0;
  std::uint16_t s = 0;
  std::vector<PlaneSupport> planes;  // hyper, syntax, content
  bool operator==(const ContainerHeader&) const = default;
};

struct Container {
  ContainerHeader header;
  std::vector<std::uint8_t> hyper;
  std::vector<std::uint8_t> syntax;
  std::vector<std::uint8_t> content;
  bool operator==(const Container&) const = default;
};

enum class BitstreamErrorKind { NotABitstream, Unsupported, Truncated, Corrupt };

class BitstreamError : public std::runtime_error {
 public:
  BitstreamError(BitstreamErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  BitstreamErrorKind kind() const { return kind_; }

 private:
  BitstreamErrorKind kind_;
};

/// Serialises to the wire format documented in docs/bitstream.md.
std::vector<std::uint8_t> pack(const Container& container);

/// Checks, in order: magic, version, structure and declared lengths, CRC.
Container unpack(std::span<const std::uint8_t> bytes);

/// Bytes pack() spends outside the three substreams.
std::size_t header_bytes(const ContainerHeader& header);

/// Rate accounting in whole bits; hyper + syntax + content + header = total.
struct RateReport {
  std::uint64_t total_bits = 0;
  std::uint64_t header_bits = 0;
  std::uint64_t hyper_bits = 0;
  std::uint64_t syntax_bits = 0;
  std::uint64_t content_bits = 0;
  double bpp_total = 0;
  double bpp_header = 0;
  double bpp_hyper = 0;
  double bpp_syntax = 0;
  double bpp_content = 0;
};

RateReport bpp_report(const Container& container, std::uint32_t width, std::uint32_t height);

}  // namespace nsx
