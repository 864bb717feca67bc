#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nsx/bitstream/container.hpp"
#include "nsx/codec/model.hpp"

namespace nsx {

/// Images travel as [1, 3, H, W] tensors with values in [0, 1].
inline constexpr Index kPadMultiple = 64;

/// Mirror-pads the bottom and right edges up to a multiple of `multiple`.
/// Reflection is periodic, so any pad width is valid, even wider than the image.
Tensor reflect_pad(const Tensor& image, Index multiple = kPadMultiple);
/// Top-left [h, w] window.
Tensor crop(const Tensor& image, Index height, Index width);

/// The bitstream does not match the decoding model (N, M, S or model id).
class ModelMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  Container container;
  /// Reconstruction the decoder will produce: cropped, clamped.
  Tensor x_hat;
  /// Unclamped synthesis output at padded size; input to post-processing.
  Tensor x_hat_padded;
  Tensor z_s_hat;
  /// Round-mode R-D terms on the padded image.
  RdTerms rd;
  /// Model estimate of the coded payload, sum of -log2 p over all symbols.
  double estimated_bits = 0;
  /// Teacher-forced content parameters in coding order.
  std::vector<float> content_mu, content_sigma;
};

struct DecodeResult {
  ContainerHeader header;
  Tensor x_hat;   // cropped, clamped
  Tensor x_post;  // post-processed and cropped; undefined unless requested
  /// Incrementally computed content parameters in coding order.
  std::vector<float> content_mu, content_sigma;
};

/// Content symbols are coded in raster order over latent positions, all
/// channels of one position before the next. Hyper symbols go channel by
/// channel, each channel in raster order; syntax symbols in vector order.
EncodeResult encode_image(const Model& model, const Tensor& image);

/// Uses only `bytes` and the model. Throws BitstreamError for malformed
/// input and ModelMismatchError for a container made by another model.
DecodeResult decode_bytes(const Model& model, std::span<const std::uint8_t> bytes, bool postprocess = false);

}  // namespace nsx
