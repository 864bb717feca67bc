#include "nsx/codec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "nsx/entropy/cdf.hpp"
#include "nsx/entropy/range_coder.hpp"
#include "nsx/tensor/ops.hpp"

namespace nsx {

namespace {

// Widest support a plane may declare; keeps every table well inside 2^16 counts.
constexpr std::int32_t kMaxSymbol = 4096;

enum Plane : std::size_t { kHyper = 0, kSyntax = 1, kContent = 2 };

Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3 || image.dim(2) < 1 || image.dim(3) < 1) {
    throw ShapeError(fmt::format("{}: expected a [1,3,H,W] image, got {}", op, to_string(image.shape())));
  }
}

std::vector<std::int32_t> to_symbols(const Tensor& t) {
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(t.numel()));
  for (const float v : t.data()) out.push_back(static_cast<std::int32_t>(v));
  return out;
}

// [min - 1, max + 1] of the observed symbols; {0, 0} for an empty plane.
PlaneSupport support_of(std::span<const std::int32_t> symbols) {
  if (symbols.empty()) return {0, 0};
  const auto [lo, hi] = std::minmax_element(symbols.begin(), symbols.end());
  if (*lo < -kMaxSymbol || *hi > kMaxSymbol) {
    throw std::runtime_error(fmt::format("encode: latent symbol {} outside the codable range +-{}",
                                         std::abs(*lo) > std::abs(*hi) ? *lo : *hi, kMaxSymbol));
  }
  return {static_cast<std::int16_t>(*lo - 1), static_cast<std::int16_t>(*hi + 1)};
}

void check_support(const PlaneSupport& s) {
  if (s.lo > s.hi || s.lo < -kMaxSymbol - 1 || s.hi > kMaxSymbol + 1) {
    throw BitstreamError(BitstreamErrorKind::Corrupt,
                         fmt::format("bitstream: invalid symbol support [{}, {}]", s.lo, s.hi));
  }
}

// Position-major, channel-minor order of a [1,C,H,W] tensor.
std::vector<float> raster_order(const Tensor& t) {
  const Index c = t.dim(1), hw = t.dim(2) * t.dim(3);
  const auto d = t.data();
  std::vector<float> out(static_cast<std::size_t>(c * hw));
  for (Index p = 0; p < hw; ++p) {
    for (Index ch = 0; ch < c; ++ch) out[p * c + ch] = d[ch * hw + p];
  }
  return out;
}

std::vector<QuantizedCdf> hyper_tables(const Model& model, const PlaneSupport& s) {
  const auto& prior = model.hyper_prior();
  std::vector<QuantizedCdf> tables;
  for (Index ch = 0; ch < prior.channels(); ++ch) tables.push_back(build_factorized_cdf(prior, ch, s.lo, s.hi));
  return tables;
}

std::vector<QuantizedCdf> gaussian_tables(std::span<const float> mu, std::span<const float> sigma,
                                          const PlaneSupport& s) {
  std::vector<QuantizedCdf> tables;
  tables.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) tables.push_back(build_gaussian_cdf(mu[i], sigma[i], s.lo, s.hi));
  return tables;
}

}  // namespace

Tensor reflect_pad(const Tensor& image, Index multiple) {
  require_image(image, "reflect_pad");
  if (multiple < 1) throw std::invalid_argument("reflect_pad: multiple must be positive");
  const Index h = image.dim(2), w = image.dim(3);
  const Index ph = (h + multiple - 1) / multiple * multiple, pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return image.detach();
  const auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(3 * ph * pw));
  for (Index c = 0; c < 3; ++c) {
    for (Index y = 0; y < ph; ++y) {
      const Index sy = reflect_index(y, h);
      for (Index x = 0; x < pw; ++x) out[(c * ph + y) * pw + x] = src[(c * h + sy) * w + reflect_index(x, w)];
    }
  }
  return Tensor(Shape{1, 3, ph, pw}, std::move(out));
}

Tensor crop(const Tensor& image, Index height, Index width) {
  if (image.rank() != 4 || image.dim(2) < height || image.dim(3) < width) {
    throw ShapeError(fmt::format("crop: cannot take {}x{} from {}", height, width, to_string(image.shape())));
  }
  const Index n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  if (h == height && w == width) return image.detach();
  const auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(n * c * height * width));
  for (Index p = 0; p < n * c; ++p) {
    for (Index y = 0; y < height; ++y) {
      std::copy_n(src.begin() + (p * h + y) * w, width, out.begin() + (p * height + y) * width);
    }
  }
  return Tensor(Shape{n, c, height, width}, std::move(out));
}

EncodeResult encode_image(const Model& model, const Tensor& image) {
  require_image(image, "encode_image");
  const auto& cfg = model.config();
  const Index height = image.dim(2), width = image.dim(3);
  if (height > 0xFFFF * 16 || width > 0xFFFF * 16) throw std::invalid_argument("encode_image: image too large");
  NoGradGuard no_grad;
  const auto x = reflect_pad(image);
  const auto fwd = model.forward(x, QuantizerMode::Round, 0);

  EncodeResult r;
  r.rd = rd_loss(x, fwd.x_hat, fwd.lik_c, fwd.lik_s, fwd.lik_h, cfg.lambda, double(x.dim(2) * x.dim(3)));
  r.estimated_bits = r.rd.bits_c + r.rd.bits_s + r.rd.bits_h;
  r.x_hat_padded = fwd.x_hat;
  r.x_hat = crop(clamp(fwd.x_hat, 0.0f, 1.0f), height, width);
  r.z_s_hat = fwd.z_s_hat;

  auto& c = r.container;
  c.header.model_id = cfg.model_id();
  c.header.width = static_cast<std::uint32_t>(width);
  c.header.height = static_cast<std::uint32_t>(height);
  c.header.n = static_cast<std::uint16_t>(cfg.n);
  c.header.m = static_cast<std::uint16_t>(cfg.m);
  c.header.s = static_cast<std::uint16_t>(cfg.syntax_length());
  c.header.planes.resize(3);

  const auto hyper = to_symbols(fwd.z_h_hat);
  c.header.planes[kHyper] = support_of(hyper);
  {
    const auto tables = hyper_tables(model, c.header.planes[kHyper]);
    const Index per_channel = fwd.z_h_hat.dim(2) * fwd.z_h_hat.dim(3);
    std::vector<QuantizedCdf> cdfs;
    cdfs.reserve(hyper.size());
    for (std::size_t i = 0; i < hyper.size(); ++i) cdfs.push_back(tables[i / per_channel]);
    c.hyper = range_encode(hyper, cdfs);
  }

  if (cfg.has_syntax()) {
    const auto syntax = to_symbols(fwd.z_s_hat);
    c.header.planes[kSyntax] = support_of(syntax);
    c.syntax = range_encode(syntax, gaussian_tables(fwd.syntax.mu.data(), fwd.syntax.sigma.data(),
                                                    c.header.planes[kSyntax]));
  }

  const auto content = raster_order(fwd.z_c_hat);
  std::vector<std::int32_t> content_symbols(content.begin(), content.end());
  c.header.planes[kContent] = support_of(content_symbols);
  r.content_mu = raster_order(fwd.content.mu);
  r.content_sigma = raster_order(fwd.content.sigma);
  c.content = range_encode(content_symbols,
                           gaussian_tables(r.content_mu, r.content_sigma, c.header.planes[kContent]));

  r.bytes = pack(c);
  return r;
}

DecodeResult decode_bytes(const Model& model, std::span<const std::uint8_t> bytes, bool postprocess) {
  const auto& cfg = model.config();
  DecodeResult r;
  const auto c = unpack(bytes);
  r.header = c.header;
  const auto& h = c.header;
  if (h.n != cfg.n || h.m != cfg.m || h.s != cfg.syntax_length() || h.model_id != cfg.model_id()) {
    throw ModelMismatchError(fmt::format(
        "decode: bitstream needs N={} M={} S={} model_id={}, model has N={} M={} S={} model_id={}", h.n, h.m, h.s,
        h.model_id, cfg.n, cfg.m, cfg.syntax_length(), cfg.model_id()));
  }
  if (h.planes.size() != 3) throw BitstreamError(BitstreamErrorKind::Corrupt, "bitstream: expected 3 symbol planes");
  for (const auto& s : h.planes) check_support(s);
  if (h.width == 0 || h.height == 0) throw BitstreamError(BitstreamErrorKind::Corrupt, "bitstream: empty image");

  NoGradGuard no_grad;
  const Index ph = (Index(h.height) + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const Index pw = (Index(h.width) + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const Index lh = ph / 16, lw = pw / 16;

  const Index ch = cfg.hyper_channels;
  const Index per_channel = (lh / 4) * (lw / 4);
  std::vector<QuantizedCdf> hyper_cdfs;
  {
    const auto tables = hyper_tables(model, h.planes[kHyper]);
    for (Index i = 0; i < ch * per_channel; ++i) hyper_cdfs.push_back(tables[i / per_channel]);
  }
  const auto hyper = range_decode(c.hyper, hyper_cdfs);
  const Tensor z_h_hat(Shape{1, ch, lh / 4, lw / 4}, std::vector<float>(hyper.begin(), hyper.end()));
  const auto psi = model.hyper_synthesis(z_h_hat);

  Tensor z_s_hat;
  if (cfg.has_syntax()) {
    const auto params = model.syntax_params(psi);
    const auto syntax = range_decode(c.syntax, gaussian_tables(params.mu.data(), params.sigma.data(), h.planes[kSyntax]));
    z_s_hat = Tensor(Shape{1, cfg.syntax_length()}, std::vector<float>(syntax.begin(), syntax.end()));
  }

  const Index cc = cfg.content_channels();
  Tensor z_c_hat(Shape{1, cc, lh, lw});
  auto zc = z_c_hat.mutable_data();
  RangeDecoder decoder(c.content);
  std::vector<float> mu(static_cast<std::size_t>(cc)), sigma(static_cast<std::size_t>(cc));
  const auto& support = h.planes[kContent];
  r.content_mu.reserve(static_cast<std::size_t>(cc * lh * lw));
  r.content_sigma.reserve(r.content_mu.capacity());
  for (Index y = 0; y < lh; ++y) {
    for (Index x = 0; x < lw; ++x) {
      model.content_params_at(z_c_hat, psi, y, x, mu, sigma);
      for (Index k = 0; k < cc; ++k) {
        const auto cdf = build_gaussian_cdf(mu[k], sigma[k], support.lo, support.hi);
        zc[(k * lh + y) * lw + x] = static_cast<float>(decoder.decode(cdf));
      }
      r.content_mu.insert(r.content_mu.end(), mu.begin(), mu.end());
      r.content_sigma.insert(r.content_sigma.end(), sigma.begin(), sigma.end());
    }
  }

  const auto x_hat = model.synthesis(z_c_hat, model.final_kernels(z_s_hat));
  r.x_hat = crop(clamp(x_hat, 0.0f, 1.0f), h.height, h.width);
  if (postprocess) r.x_post = crop(model.postprocess(x_hat, z_s_hat), h.height, h.width);
  return r;
}

}  // namespace nsx
