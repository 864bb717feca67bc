#include "nsx/bitstream/container.hpp"

#include <zlib.h>

#include <algorithm>

#include "nsx/util/byte_io.hpp"

namespace nsx {

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'S', 'Y', 'X'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (!bytes.empty()) {
    const auto n = std::min<std::size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(n));
    bytes = bytes.subspan(n);
  }
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void fail(BitstreamErrorKind kind, const std::string& what) { throw BitstreamError(kind, what); }

}  // namespace

std::size_t header_bytes(const ContainerHeader& header) {
  // magic, version, model_id, width, height, N, M, S, plane count, planes,
  // three lengths, CRC.
  return 4 + 2 + 2 + 4 + 4 + 2 + 2 + 2 + 2 + 4 * header.planes.size() + 12 + 4;
}

std::vector<std::uint8_t> pack(const Container& c) {
  if (c.header.planes.size() > 0xFFFF) throw std::invalid_argument("pack: too many planes");
  for (const auto* s : {&c.hyper, &c.syntax, &c.content}) {
    if (s->size() > 0xFFFFFFFFu) throw std::invalid_argument("pack: substream too large");
  }
  ByteWriter w;
  w.raw(kMagic);
  w.u16(c.header.version);
  w.u16(c.header.model_id);
  w.u32(c.header.width);
  w.u32(c.header.height);
  w.u16(c.header.n);
  w.u16(c.header.m);
  w.u16(c.header.s);
  w.u16(static_cast<std::uint16_t>(c.header.planes.size()));
  for (const auto& p : c.header.planes) {
    w.i16(p.lo);
    w.i16(p.hi);
  }
  w.u32(static_cast<std::uint32_t>(c.hyper.size()));
  w.u32(static_cast<std::uint32_t>(c.syntax.size()));
  w.u32(static_cast<std::uint32_t>(c.content.size()));
  w.raw(c.hyper);
  w.raw(c.syntax);
  w.raw(c.content);
  const auto crc = crc32_of(std::span(w.bytes()).subspan(4));
  w.u32(crc);
  return w.take();
}

Container unpack(std::span<const std::uint8_t> bytes) {
  const std::size_t prefix = std::min<std::size_t>(bytes.size(), 4);
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(prefix), kMagic)) {
    fail(BitstreamErrorKind::NotABitstream, "not a bitstream: bad magic");
  }
  if (bytes.size() < 6) fail(BitstreamErrorKind::Truncated, "truncated: header incomplete");

  Container c;
  ByteReader r(bytes.subspan(4));
  try {
    c.header.version = r.u16();
    if (c.header.version != kContainerVersion) {
      fail(BitstreamErrorKind::Unsupported, "unsupported bitstream version " + std::to_string(c.header.version));
    }
    c.header.model_id = r.u16();
    c.header.width = r.u32();
    c.header.height = r.u32();
    c.header.n = r.u16();
    c.header.m = r.u16();
    c.header.s = r.u16();
    const std::uint16_t planes = r.u16();
    c.header.planes.resize(planes);
    for (auto& p : c.header.planes) {
      p.lo = r.i16();
      p.hi = r.i16();
    }
    const std::uint64_t lh = r.u32(), ls = r.u32(), lc = r.u32();
    const std::uint64_t need = lh + ls + lc + 4;
    if (r.remaining() < need) fail(BitstreamErrorKind::Truncated, "truncated: substreams shorter than declared");
    if (r.remaining() > need) fail(BitstreamErrorKind::Corrupt, "corrupt: trailing bytes after checksum");
    auto take = [&](std::uint64_t n) {
      auto s = r.raw(static_cast<std::size_t>(n));
      return std::vector<std::uint8_t>(s.begin(), s.end());
    };
    c.hyper = take(lh);
    c.syntax = take(ls);
    c.content = take(lc);
    const std::size_t body_end = 4 + r.position();
    const std::uint32_t stored = r.u32();
    if (stored != crc32_of(bytes.subspan(4, body_end - 4))) fail(BitstreamErrorKind::Corrupt, "corrupt: checksum mismatch");
  } catch (const TruncatedInput&) {
    fail(BitstreamErrorKind::Truncated, "truncated: header incomplete");
  }
  return c;
}

RateReport bpp_report(const Container& c, std::uint32_t width, std::uint32_t height) {
  RateReport r;
  r.hyper_bits = 8 * c.hyper.size();
  r.syntax_bits = 8 * c.syntax.size();
  r.content_bits = 8 * c.content.size();
  r.header_bits = 8 * header_bytes(c.header);
  r.total_bits = r.header_bits + r.hyper_bits + r.syntax_bits + r.content_bits;
  const double pixels = static_cast<double>(width) * static_cast<double>(height);
  r.bpp_total = static_cast<double>(r.total_bits) / pixels;
  r.bpp_header = static_cast<double>(r.header_bits) / pixels;
  r.bpp_hyper = static_cast<double>(r.hyper_bits) / pixels;
  r.bpp_syntax = static_cast<double>(r.syntax_bits) / pixels;
  r.bpp_content = static_cast<double>(r.content_bits) / pixels;
  return r;
}

}  // namespace nsx
