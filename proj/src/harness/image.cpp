#include "nsx/harness/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "nsx/tensor/random.hpp"

namespace nsx {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Next whitespace-delimited token, skipping '#' comments.
  std::string token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') out += char(bytes_[pos_++]);
    if (out.empty()) throw ImageError("ppm: truncated header");
    return out;
  }

  long number(const char* what) {
    const auto t = token();
    if (t.size() > 9 || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(c); })) {
      throw ImageError(fmt::format("ppm: malformed {} '{}'", what, t));
    }
    return std::stol(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw ImageError("ppm: missing raster separator");
    return pos_ + 1;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

float smoothstep_edge(double signed_distance) {
  // Anti-aliased edge about one pixel wide; positive inside.
  return static_cast<float>(std::clamp(0.5 + signed_distance, 0.0, 1.0));
}

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  HeaderParser p(bytes);
  if (p.token() != "P6") throw ImageError("ppm: not a binary P6 file");
  const long width = p.number("width");
  const long height = p.number("height");
  const long maxval = p.number("maxval");
  if (width <= 0 || height <= 0) throw ImageError("ppm: empty image");
  if (maxval != 255) throw ImageError(fmt::format("ppm: unsupported maxval {} (only 255)", maxval));
  const std::size_t start = p.raster_start();
  const std::size_t need = static_cast<std::size_t>(3 * width * height);
  if (bytes.size() - start < need) {
    throw ImageError(fmt::format("ppm: short raster, {} of {} bytes", bytes.size() - start, need));
  }
  std::vector<float> v(need);
  const std::size_t plane = static_cast<std::size_t>(width * height);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) v[c * plane + i] = static_cast<float>(bytes[start + 3 * i + c]) / 255.0f;
  }
  return Tensor(Shape{1, 3, height, width}, std::move(v));
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw ShapeError("encode_ppm: expected [1,3,H,W], got " + to_string(image.shape()));
  }
  const Index h = image.dim(2), w = image.dim(3);
  const auto header = fmt::format("P6\n{} {}\n255\n", w, h);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(3 * h * w));
  const auto d = image.data();
  for (Index i = 0; i < h * w; ++i) {
    for (Index c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(d[c * h * w + i]), 0.0, 1.0);
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  return out;
}

Tensor load_image(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

void save_image(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }

Tensor quantize_8bit(const Tensor& image) { return decode_ppm(encode_ppm(image)); }

Tensor synth_image(Index height, Index width, std::uint64_t seed) {
  Rng rng(seed);
  const Index plane = height * width;
  std::vector<double> img(static_cast<std::size_t>(3 * plane));

  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.1, 0.9);
    c1[c] = rng.uniform(0.1, 0.9);
  }
  const double angle = rng.uniform(0, 2 * M_PI);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double span = std::abs(gx) * width + std::abs(gy) * height;
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + (gx * (x - width / 2.0) + gy * (y - height / 2.0)) / span, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img[c * plane + y * width + x] = c0[c] + (c1[c] - c0[c]) * t;
    }
  }

  const int shapes = 2 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    double colour[3];
    for (auto& v : colour) v = rng.uniform(0.0, 1.0);
    const double cx = rng.uniform(0, double(width)), cy = rng.uniform(0, double(height));
    const double size = rng.uniform(0.1, 0.35) * double(std::min(width, height));
    const bool disc = rng.below(2) == 0;
    const double aspect = rng.uniform(0.5, 2.0);
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double d = disc ? size - std::hypot(dx, dy)
                              : std::min(size * aspect - std::abs(dx), size / aspect - std::abs(dy));
        const float a = smoothstep_edge(d);
        if (a == 0.0f) continue;
        for (int c = 0; c < 3; ++c) {
          auto& v = img[c * plane + y * width + x];
          v += a * (colour[c] - v);
        }
      }
    }
  }

  const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4);
  double amp[3], phase[3];
  for (int c = 0; c < 3; ++c) {
    amp[c] = rng.uniform(0.0, 0.08);
    phase[c] = rng.uniform(0, 2 * M_PI);
  }
  for (int c = 0; c < 3; ++c) {
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        img[c * plane + y * width + x] += amp[c] * std::sin(fx * x + fy * y + phase[c]) + 0.01 * rng.normal();
      }
    }
  }

  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = float(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0)) / 255.0f;
  return Tensor(Shape{1, 3, height, width}, std::move(out));
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") out.push_back(entry.path());
  }
  if (ec) throw std::runtime_error("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace nsx
