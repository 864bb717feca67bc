#include "nsx/layers/functional.hpp"

#include <cmath>

#include "nsx/tensor/random.hpp"

namespace nsx {

template <typename Real>
GdnParams<Real> GdnParams<Real>::from_effective(const std::vector<double>& beta,
                                                const std::vector<double>& gamma, bool inverse) {
  const auto c = static_cast<Index>(beta.size());
  if (static_cast<Index>(gamma.size()) != c * c) throw ShapeError("gdn: gamma must be C x C");
  std::vector<Real> b(beta.size()), g(gamma.size());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    b[i] = static_cast<Real>(std::sqrt(std::max(beta[i] - kGdnBetaMin, 0.0)));
  }
  for (std::size_t i = 0; i < gamma.size(); ++i) g[i] = static_cast<Real>(std::sqrt(std::max(gamma[i], 0.0)));
  return {BasicTensor<Real>(Shape{c}, std::move(b)), BasicTensor<Real>(Shape{c, c}, std::move(g)), inverse};
}

template <typename Real>
BasicTensor<Real> gdn(const BasicTensor<Real>& x, const GdnParams<Real>& params) {
  const Index c = params.beta_raw.numel();
  if (x.rank() != 4 || x.dim(1) != c || params.gamma_raw.shape() != Shape{c, c}) {
    throw ShapeError("gdn: input " + to_string(x.shape()) + " does not match " + std::to_string(c) +
                     " channels");
  }
  const auto beta = add_scalar(square(params.beta_raw), static_cast<Real>(kGdnBetaMin));
  const auto gamma = reshape(square(params.gamma_raw), Shape{c, c, 1, 1});
  const auto norm = sqrt(conv2d(square(x), gamma, beta, ConvOptions{1, 0}));
  return params.inverse ? mul(x, norm) : div(x, norm);
}

double round_half_away(double v) { return std::round(v); }

template <typename Real>
BasicTensor<Real> quantize(const BasicTensor<Real>& y, QuantizerMode mode, std::uint64_t seed) {
  const auto yv = y.data();
  std::vector<Real> offset(yv.size());
  if (mode == QuantizerMode::Noise) {
    Rng rng(seed);
    for (auto& u : offset) u = static_cast<Real>(rng.uniform() - 0.5);
  } else {
    std::vector<Real> rounded(yv.size());
    for (std::size_t i = 0; i < yv.size(); ++i) {
      rounded[i] = static_cast<Real>(round_half_away(static_cast<double>(yv[i])));
    }
    if (mode == QuantizerMode::Round) return BasicTensor<Real>(y.shape(), std::move(rounded));
    return BasicTensor<Real>::make_result(y.shape(), std::move(rounded), "quantize_ste", {y},
                                          [](detail::Node<Real>& self) {
                                            auto* p = self.parents[0].get();
                                            if (!p->requires_grad) return;
                                            auto& g = p->ensure_grad();
                                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                          });
  }
  return add(y, BasicTensor<Real>(y.shape(), std::move(offset)));
}

template <typename Real>
BasicTensor<Real> dense(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                        const BasicTensor<Real>& bias) {
  if (x.rank() == 1) {
    return reshape(linear(reshape(x, Shape{1, x.dim(0)}), weight, bias), Shape{weight.dim(0)});
  }
  return linear(x, weight, bias);
}

template <typename Real>
BasicTensor<Real> apply_dynamic_deconv(const BasicTensor<Real>& x, const BasicTensor<Real>& kernels,
                                       int stride, int pad) {
  return conv2d_transpose(x, kernels, BasicTensor<Real>(), ConvTransposeOptions{stride, pad, 0});
}

#define NSX_INSTANTIATE_LAYERS(Real)                                                                 \
  template struct GdnParams<Real>;                                                                   \
  template BasicTensor<Real> gdn(const BasicTensor<Real>&, const GdnParams<Real>&);                  \
  template BasicTensor<Real> quantize(const BasicTensor<Real>&, QuantizerMode, std::uint64_t);      \
  template BasicTensor<Real> dense(const BasicTensor<Real>&, const BasicTensor<Real>&,               \
                                   const BasicTensor<Real>&);                                        \
  template BasicTensor<Real> apply_dynamic_deconv(const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                                  int, int);

NSX_INSTANTIATE_LAYERS(float)
NSX_INSTANTIATE_LAYERS(double)

}  // namespace nsx
