#pragma once

#include <string>

#include "nsx/layers/functional.hpp"
#include "nsx/tensor/parameters.hpp"
#include "nsx/tensor/random.hpp"

namespace nsx {

/// Uniform init with variance 1/fan_in.
Tensor fan_in_uniform(Shape shape, double fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, Index cin, Index cout, Index k, int stride,
         int pad, Rng& rng, bool bias = true);
  Tensor operator()(const Tensor& x) const;

  Tensor weight;  // [cout,cin,k,k]
  Tensor bias;    // [cout] or undefined
  ConvOptions options;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterStore& store, const std::string& name, Index cin, Index cout, Index k,
                  int stride, int pad, int output_padding, Rng& rng, bool bias = true);
  Tensor operator()(const Tensor& x) const;

  Tensor weight;  // [cin,cout,k,k]
  Tensor bias;
  ConvTransposeOptions options;
};

/// Raster-causal "same" convolution; see masked_conv2d.
class MaskedConv2d {
 public:
  MaskedConv2d() = default;
  MaskedConv2d(ParameterStore& store, const std::string& name, Index cin, Index cout, Index k,
               Rng& rng);
  Tensor operator()(const Tensor& x) const;

  Tensor weight;
  Tensor bias;
};

class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
        bool bias = true);
  Tensor operator()(const Tensor& x) const;

  Tensor weight;  // [out,in]
  Tensor bias;
};

/// Starts at beta = 1, gamma = 0.1 I.
class Gdn {
 public:
  Gdn() = default;
  Gdn(ParameterStore& store, const std::string& name, Index channels, bool inverse);
  Tensor operator()(const Tensor& x) const;

  GdnParams<float> params;
};

}  // namespace nsx
