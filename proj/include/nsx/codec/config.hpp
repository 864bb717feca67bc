#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nsx/tensor/tensor.hpp"

namespace nsx {

/// Operating points; a container's model_id indexes this table.
inline constexpr std::array<double, 6> kLambdaPresets{8e-4, 1.5e-3, 2.5e-3, 8e-3, 1.5e-2, 2e-2};

/// Index of the preset equal to lambda, or -1.
int lambda_preset_index(double lambda);

struct ModelConfig {
  Index n = 32;               // latent channels
  Index m = 8;                // syntax channels; 0 selects the single-stream baseline
  Index hyper_channels = 16;
  std::vector<Index> syntax_widths{8, 8, 8};
  Index final_kernel = 5;
  Index generator_hidden = 128;
  Index context_hidden = 64;  // width of the 1x1 fusion layers
  Index postproc_width = 16;
  Index postproc_groups = 2;
  Index postproc_blocks = 2;  // residual blocks per group
  double lambda = 1.5e-2;
  bool desk_scale = true;
  std::uint64_t seed = 1;

  Index content_channels() const { return n - m; }
  /// Syntax vector length; 0 for the baseline.
  Index syntax_length() const;
  std::uint16_t model_id() const;
  bool has_syntax() const { return m > 0; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  static ModelConfig desk(double lambda = 1.5e-2);
  /// N=192, M=16, 4 post-processing groups.
  static ModelConfig full_low_rate(double lambda);
  /// N=384, M=32, 6 post-processing groups.
  static ModelConfig full_high_rate(double lambda);

  /// Assigns one field from its text form. Returns false for an unknown key;
  /// throws std::invalid_argument for a malformed value.
  bool set(const std::string& key, const std::string& value);

  /// key=value lines, one per field.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ModelConfig load(const std::filesystem::path& path);

  bool operator==(const ModelConfig&) const = default;
};

/// Parses "key=value" lines; '#' starts a comment. Throws on malformed lines.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

}  // namespace nsx
