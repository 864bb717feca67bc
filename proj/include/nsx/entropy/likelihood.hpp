#pragma once

#include <array>
#include <string>

#include "nsx/entropy/cdf.hpp"
#include "nsx/tensor/parameters.hpp"
#include "nsx/tensor/random.hpp"

namespace nsx {

/// Mass of the unit bin around y under N(mu, max(sigma, kSigmaMin)),
/// floored at kLikelihoodFloor. Differentiable in y, mu and sigma.
template <typename Real>
BasicTensor<Real> gaussian_likelihood(const BasicTensor<Real>& y, const BasicTensor<Real>& mu,
                                      const BasicTensor<Real>& sigma);

/// max(p, kLikelihoodFloor). Where the floor is active the gradient still
/// passes if it points towards larger p, so floored bins can recover.
template <typename Real>
BasicTensor<Real> likelihood_floor(const BasicTensor<Real>& p);

/// Sum of -log2 p. Throws EntropyError on p <= 0 or non-finite p.
template <typename Real>
BasicTensor<Real> rate_bits(const BasicTensor<Real>& likelihoods);

/// Per-channel monotone CDF network: four stages of widths 1-3-3-3-1.
/// Stage k maps x to H_k x + b_k and, except the last, adds
/// tanh(a_k) * tanh(x). H_k = softplus(H_raw_k) is positive, which keeps the
/// composite map nondecreasing.
template <typename Real>
struct FactorizedParams {
  static constexpr int kStages = 4;
  static constexpr std::array<Index, kStages + 1> kWidths{1, 3, 3, 3, 1};

  std::array<BasicTensor<Real>, kStages> h_raw;    // [C, out, in]
  std::array<BasicTensor<Real>, kStages> bias;     // [C, out]
  std::array<BasicTensor<Real>, kStages - 1> gate; // [C, out]

  Index channels() const { return bias[0].dim(0); }

  static FactorizedParams init(Index channels, Rng& rng, double init_scale = 10.0);
};

/// Logits of the modelled CDF at x, where x is [C, L] (L values per channel).
template <typename Real>
BasicTensor<Real> factorized_logits(const BasicTensor<Real>& x, const FactorizedParams<Real>& params);

/// Per-channel likelihoods of z [N, C, H, W]: F(z + 0.5) - F(z - 0.5).
template <typename Real>
BasicTensor<Real> factorized_likelihood(const BasicTensor<Real>& z, const FactorizedParams<Real>& params);

/// Registers a float FactorizedModel under "<prefix>.{h,b,a}<k>".
FactorizedParams<float> make_factorized(ParameterStore& store, const std::string& prefix, Index channels,
                                        Rng& rng);

/// Table over [lo, hi] for one channel; end buckets take the tails.
QuantizedCdf build_factorized_cdf(const FactorizedParams<float>& params, Index channel, std::int32_t lo,
                                  std::int32_t hi);

}  // namespace nsx
