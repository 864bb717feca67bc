#pragma once

#include <cstdint>
#include <vector>

#include "nsx/codec/pipeline.hpp"

namespace nsx {

struct FinetuneOptions {
  int iterations = 100;
  double lr = 1e-5;
  /// Gradient surrogate for quantisation during the updates. Selection
  /// always uses the round-mode loss.
  QuantizerMode mode = QuantizerMode::StraightThrough;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  EncodeResult encoded;  // produced with the best analysis parameters
  double loss_initial = 0;
  double loss_final = 0;
  int best_iteration = 0;
  std::vector<double> trace;  // round-mode loss before each update, then after the last
};

/// Per-image encoder optimisation. Only the analysis transform of a private
/// copy is updated; the decoder-side parameters, and `model` itself, are
/// untouched, so the result decodes with the shared model. The returned
/// encoding uses the iterate with the lowest round-mode loss, so
/// loss_final <= loss_initial always holds.
FinetuneResult finetune_encode(const Model& model, const Tensor& image, const FinetuneOptions& options = {});

}  // namespace nsx
