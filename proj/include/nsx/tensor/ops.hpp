#pragma once

#include <vector>

#include "nsx/tensor/tensor.hpp"

// Differentiable ops over BasicTensor. Elementwise binary ops accept equal
// shapes or a single-element right operand; the only other broadcast forms
// are per-channel biases (inside the conv/linear ops) and the explicit
// prefix-broadcast ops below.
namespace nsx {

struct ConvOptions {
  int stride = 1;
  int pad = 0;
};

struct ConvTransposeOptions {
  int stride = 1;
  int pad = 0;
  int output_padding = 0;
};

template <typename Real> BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real> BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real> BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real> BasicTensor<Real> div(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real> BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real value);
template <typename Real> BasicTensor<Real> scale(const BasicTensor<Real>& a, Real factor);

/// x + b where b's shape is a prefix of x's shape; b repeats over trailing axes.
template <typename Real> BasicTensor<Real> add_prefix(const BasicTensor<Real>& x, const BasicTensor<Real>& b);
/// x * s where s's shape is a prefix of x's shape.
template <typename Real> BasicTensor<Real> mul_prefix(const BasicTensor<Real>& x, const BasicTensor<Real>& s);

template <typename Real> BasicTensor<Real> relu(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> leaky_relu(const BasicTensor<Real>& x, Real slope);
template <typename Real> BasicTensor<Real> abs(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> square(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> sqrt(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> exp(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> log(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> tanh(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> sigmoid(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> softplus(const BasicTensor<Real>& x);
/// Gradient passes only where lo < x < hi.
template <typename Real> BasicTensor<Real> clamp(const BasicTensor<Real>& x, Real lo, Real hi);

template <typename Real> BasicTensor<Real> sum(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> mean(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape);

/// [m,k] x [k,n] -> [m,n]
template <typename Real> BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
/// [g,m,k] x [g,k,n] -> [g,m,n]
template <typename Real> BasicTensor<Real> bmm(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
/// x [B,in], weight [out,in], bias [out] or undefined -> [B,out]
template <typename Real>
BasicTensor<Real> linear(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias);

/// x [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout] or undefined.
template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias, ConvOptions options);

/// x [N,Cin,H,W], weight [Cin,Cout,k,k] shared by the batch or
/// [N,Cin,Cout,k,k] per sample, bias [Cout] or undefined.
/// Output extent (H-1)*stride - 2*pad + k + output_padding.
template <typename Real>
BasicTensor<Real> conv2d_transpose(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                                   const BasicTensor<Real>& bias, ConvTransposeOptions options);

/// Stride-1 "same" convolution whose output at (y,x) sees only inputs
/// strictly before (y,x) in raster order. Odd square kernels only.
template <typename Real>
BasicTensor<Real> masked_conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                                const BasicTensor<Real>& bias);

/// Value of masked_conv2d at a single output position, computed with the
/// identical arithmetic sequence. Writes weight.dim(0) values to out.
template <typename Real>
void masked_conv2d_at(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                      const BasicTensor<Real>& bias, Index n, Index y, Index x_pos,
                      std::span<Real> out);

/// [N,C,H,W] -> [N,C]
template <typename Real> BasicTensor<Real> global_avg_pool(const BasicTensor<Real>& x);
template <typename Real> BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>& parts);
template <typename Real> BasicTensor<Real> slice_channels(const BasicTensor<Real>& x, Index begin, Index end);
template <typename Real> BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>& parts);
template <typename Real> BasicTensor<Real> slice_batch(const BasicTensor<Real>& x, Index begin, Index end);

/// Mean squared difference, a scalar.
template <typename Real> BasicTensor<Real> mse(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

}  // namespace nsx
