#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsx/tensor/tensor.hpp"

namespace nsx {

/// Malformed or unsupported image file.
class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses binary P6 with maxval 255 into a [1, 3, H, W] tensor of value/255.
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
/// Rounds to the nearest 8-bit level after clamping to [0, 1].
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

Tensor load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Tensor& image);

/// The image as written to an 8-bit file and read back.
Tensor quantize_8bit(const Tensor& image);

/// Procedural test image: a colour gradient, a few anti-aliased shapes, a
/// low-frequency texture and mild grain, rounded to 8 bits.
Tensor synth_image(Index height, Index width, std::uint64_t seed);

/// Sorted *.ppm paths in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary file and a rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace nsx
