#include "nsx/layers/modules.hpp"

#include <cmath>

namespace nsx {

Tensor fan_in_uniform(Shape shape, double fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / fan_in);
  return uniform_tensor<float>(std::move(shape), -bound, bound, rng);
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, Index cin, Index cout, Index k,
               int stride, int pad, Rng& rng, bool with_bias)
    : options{stride, pad} {
  weight = store.add(name + ".weight", fan_in_uniform({cout, cin, k, k}, double(cin * k * k), rng));
  if (with_bias) bias = store.add(name + ".bias", Tensor(Shape{cout}));
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, options); }

ConvTranspose2d::ConvTranspose2d(ParameterStore& store, const std::string& name, Index cin,
                                 Index cout, Index k, int stride, int pad, int output_padding,
                                 Rng& rng, bool with_bias)
    : options{stride, pad, output_padding} {
  // Each output pixel receives about cin*k*k/stride^2 taps.
  const double fan_in = double(cin * k * k) / double(stride * stride);
  weight = store.add(name + ".weight", fan_in_uniform({cin, cout, k, k}, fan_in, rng));
  if (with_bias) bias = store.add(name + ".bias", Tensor(Shape{cout}));
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return conv2d_transpose(x, weight, bias, options);
}

MaskedConv2d::MaskedConv2d(ParameterStore& store, const std::string& name, Index cin, Index cout,
                           Index k, Rng& rng) {
  const double causal_taps = double(k * k / 2);
  weight = store.add(name + ".weight", fan_in_uniform({cout, cin, k, k}, double(cin) * causal_taps, rng));
  bias = store.add(name + ".bias", Tensor(Shape{cout}));
}

Tensor MaskedConv2d::operator()(const Tensor& x) const { return masked_conv2d(x, weight, bias); }

Dense::Dense(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
             bool with_bias) {
  weight = store.add(name + ".weight", fan_in_uniform({out, in}, double(in), rng));
  if (with_bias) bias = store.add(name + ".bias", Tensor(Shape{out}));
}

Tensor Dense::operator()(const Tensor& x) const { return dense(x, weight, bias); }

Gdn::Gdn(ParameterStore& store, const std::string& name, Index channels, bool inverse) {
  std::vector<double> beta(static_cast<std::size_t>(channels), 1.0);
  std::vector<double> gamma(static_cast<std::size_t>(channels * channels), 0.0);
  for (Index c = 0; c < channels; ++c) gamma[static_cast<std::size_t>(c * channels + c)] = 0.1;
  auto init = GdnParams<float>::from_effective(beta, gamma, inverse);
  params.beta_raw = store.add(name + ".beta", init.beta_raw);
  params.gamma_raw = store.add(name + ".gamma", init.gamma_raw);
  params.inverse = inverse;
}

Tensor Gdn::operator()(const Tensor& x) const { return gdn(x, params); }

}  // namespace nsx
