#pragma once

#include <cstdint>

#include "nsx/tensor/ops.hpp"

namespace nsx {

/// Lower bound added to the reparameterised GDN offset.
inline constexpr double kGdnBetaMin = 1e-6;

/// GDN parameters in reparameterised form: beta = beta_raw^2 + kGdnBetaMin,
/// gamma = gamma_raw^2, which keeps beta > 0 and gamma >= 0 under any update.
template <typename Real>
struct GdnParams {
  BasicTensor<Real> beta_raw;   // [C]
  BasicTensor<Real> gamma_raw;  // [C,C], row i weights the squares feeding channel i
  bool inverse = false;

  /// Raw values reproducing the given effective beta/gamma.
  static GdnParams from_effective(const std::vector<double>& beta, const std::vector<double>& gamma,
                                  bool inverse);
};

/// y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2); the inverse multiplies.
template <typename Real>
BasicTensor<Real> gdn(const BasicTensor<Real>& x, const GdnParams<Real>& params);

enum class QuantizerMode {
  Noise,           // x + U(-0.5, 0.5), identity gradient
  Round,           // round half away from zero, no gradient
  StraightThrough  // rounded forward, identity gradient
};

double round_half_away(double v);

template <typename Real>
BasicTensor<Real> quantize(const BasicTensor<Real>& y, QuantizerMode mode, std::uint64_t seed);

/// Wx + b for x of shape [in] or [batch,in]; b may be undefined.
template <typename Real>
BasicTensor<Real> dense(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                        const BasicTensor<Real>& bias);

/// Bias-free transposed convolution with externally generated kernels of
/// shape [Cin,Cout,k,k] (shared) or [N,Cin,Cout,k,k] (one set per sample).
/// The kernels are activations, so gradients flow back into their producer.
template <typename Real>
BasicTensor<Real> apply_dynamic_deconv(const BasicTensor<Real>& x, const BasicTensor<Real>& kernels,
                                       int stride, int pad);

}  // namespace nsx
