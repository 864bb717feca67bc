#pragma once

#include <memory>
#include <span>
#include <vector>

#include "nsx/codec/config.hpp"
#include "nsx/entropy/likelihood.hpp"
#include "nsx/layers/modules.hpp"

namespace nsx {

struct GaussianPair {
  Tensor mu;
  Tensor sigma;  // >= kSigmaMin by construction
};

struct ForwardResult {
  Tensor y;        // analysis output before the split
  Tensor z_c_hat;  // [B, N-M, h, w]
  Tensor z_s_hat;  // [B, S]; undefined for the baseline
  Tensor z_h_hat;  // [B, C_h, h/4, w/4]
  Tensor psi;      // hyper-synthesis features [B, N, h, w]
  GaussianPair content;
  GaussianPair syntax;
  Tensor lik_c, lik_s, lik_h;
  Tensor x_hat;    // unclamped synthesis output
};

/// The R-D objective lambda * 255^2 * MSE + (bits_c + bits_s + bits_h) / pixels.
///
/// lambda weights distortion measured on the 0..255 scale, so the preset
/// list orders operating points from low to high rate.
struct RdTerms {
  Tensor loss;
  double mse = 0;
  double bits_c = 0, bits_s = 0, bits_h = 0;
  double pixels = 0;
  double bpp() const { return (bits_c + bits_s + bits_h) / pixels; }
};

RdTerms rd_loss(const Tensor& x, const Tensor& x_hat, const Tensor& lik_c, const Tensor& lik_s,
                const Tensor& lik_h, double lambda, double num_pixels);

/// Dual-stream codec network. With m == 0 the syntax branch disappears and
/// the final synthesis layer becomes an ordinary learned kernel.
///
/// Parameter name prefixes: analysis, syntax_gen, weight_gen, hyper_analysis,
/// hyper_synthesis, hyper_prior, syntax_head, context, synthesis, final,
/// post. Everything except post is stage-I.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Fresh model with identical configuration and parameter values.
  std::unique_ptr<Model> clone() const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  std::vector<Tensor> stage1_parameters() const;
  std::vector<Tensor> postproc_parameters() const;

  ForwardResult forward(const Tensor& x, QuantizerMode mode, std::uint64_t seed) const;

  Tensor analysis(const Tensor& x) const;
  Tensor syntax_generate(const Tensor& features) const;
  /// Final-layer kernels [B, N, 3, k, k]; the baseline returns its static
  /// [N, 3, k, k] kernel and ignores the argument.
  Tensor final_kernels(const Tensor& z_s_hat) const;
  Tensor hyper_analysis(const Tensor& y) const;
  Tensor hyper_synthesis(const Tensor& z_h_hat) const;
  GaussianPair syntax_params(const Tensor& psi) const;
  /// Teacher-forced: every position sees the masked neighbourhood of z_c_hat.
  GaussianPair content_params(const Tensor& z_c_hat, const Tensor& psi) const;
  /// Parameters of the symbols at one latent position of sample 0, computed
  /// from the decoded prefix only. Bit-identical to content_params.
  void content_params_at(const Tensor& z_c_hat, const Tensor& psi, Index y, Index x, std::span<float> mu,
                         std::span<float> sigma) const;
  /// Unclamped reconstruction.
  Tensor synthesis(const Tensor& z_c_hat, const Tensor& kernels) const;
  /// Enhanced reconstruction x_hat + residual, clamped to [0, 1].
  Tensor postprocess(const Tensor& x_hat, const Tensor& z_s_hat) const;

  const FactorizedParams<float>& hyper_prior() const { return hyper_prior_; }

 private:
  struct ResBlock {
    Conv2d conv1, conv2;
    Dense squeeze, excite;
  };
  struct ResGroup {
    std::vector<ResBlock> blocks;
    Conv2d tail;
  };

  Tensor fuse_context(const Tensor& ctx, const Tensor& psi) const;
  // kernels = b + W (g h): the fixed gain g = 1/hidden keeps Adam's per-step
  // change of a generated kernel comparable to that of the base kernel b.
  Tensor generate(const Dense& hidden, const Dense& out, const Tensor& z_s_hat, Shape kernel_shape) const;
  double generator_gain() const { return 1.0 / double(config_.generator_hidden); }

  ModelConfig config_;
  ParameterStore store_;

  std::vector<Conv2d> analysis_;
  std::vector<Gdn> analysis_gdn_;
  std::vector<Conv2d> syntax_gen_;
  Dense weight_hidden_, weight_out_;
  std::vector<Conv2d> hyper_analysis_;
  std::vector<ConvTranspose2d> hyper_synthesis_;
  FactorizedParams<float> hyper_prior_;
  Dense syntax_hidden_, syntax_out_;
  MaskedConv2d context_;
  std::vector<Conv2d> fusion_;
  std::vector<ConvTranspose2d> synthesis_;
  std::vector<Gdn> synthesis_igdn_;
  Tensor static_final_;

  Conv2d post_head_;
  std::vector<ResGroup> post_groups_;
  Conv2d post_body_tail_;
  Dense post_weight_hidden_, post_weight_out_;
  Tensor post_static_final_;
};

}  // namespace nsx
