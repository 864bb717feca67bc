#include <string>

#include "gemm.hpp"
#include "nsx/tensor/ops.hpp"

namespace nsx {

namespace {

template <typename Real>
using NodeT = detail::Node<Real>;

template <typename Real>
NodeT<Real>* grad_target(NodeT<Real>& self, std::size_t i) {
  NodeT<Real>* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

[[noreturn]] void conv_error(const char* op, const std::string& what, const Shape& x, const Shape& w) {
  throw ShapeError(std::string(op) + ": " + what + " (input " + to_string(x) + ", weight " +
                   to_string(w) + ")");
}

template <typename Real>
void check_bias(const char* op, const BasicTensor<Real>& bias, Index channels) {
  if (bias.defined() && bias.shape() != Shape{channels}) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias.shape()) +
                     " does not match " + std::to_string(channels) + " output channels");
  }
}

}  // namespace

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias, ConvOptions options) {
  const char* op = "conv2d";
  if (x.rank() != 4 || weight.rank() != 4) conv_error(op, "expected rank-4 tensors", x.shape(), weight.shape());
  if (options.stride < 1 || options.pad < 0) conv_error(op, "invalid stride/pad", x.shape(), weight.shape());
  const Index n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k) conv_error(op, "channel/kernel mismatch", x.shape(), weight.shape());
  check_bias(op, bias, cout);
  const Index stride = options.stride, pad = options.pad;
  if (h + 2 * pad < k || w + 2 * pad < k) conv_error(op, "kernel larger than padded input", x.shape(), weight.shape());
  const Index oh = (h + 2 * pad - k) / stride + 1;
  const Index ow = (w + 2 * pad - k) / stride + 1;
  const Index kk = cin * k * k;
  const Index p = oh * ow;

  std::vector<Real> out(static_cast<std::size_t>(n_batch * cout * p));
  std::vector<Real> col(static_cast<std::size_t>(kk * p));
  std::vector<double> acc(static_cast<std::size_t>(cout * p));
  const auto xv = x.data();
  const auto wv = weight.data();
  for (Index n = 0; n < n_batch; ++n) {
    detail::im2col(xv.data() + n * cin * h * w, cin, h, w, k, stride, pad, oh, ow, col.data());
    detail::gemm(wv.data(), col.data(), acc.data(), cout, kk, p);
    for (Index c = 0; c < cout; ++c) {
      const double b = bias.defined() ? static_cast<double>(bias.data()[c]) : 0.0;
      Real* dst = out.data() + (n * cout + c) * p;
      for (Index i = 0; i < p; ++i) dst[i] = static_cast<Real>(acc[c * p + i] + b);
    }
  }

  std::vector<BasicTensor<Real>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return BasicTensor<Real>::make_result(
      Shape{n_batch, cout, oh, ow}, std::move(out), op, std::move(parents),
      [=](NodeT<Real>& self) {
        const auto& g = self.grad;
        const auto& xs = self.parents[0]->data;
        const auto& ws = self.parents[1]->data;
        auto* px = grad_target(self, 0);
        auto* pw = grad_target(self, 1);
        NodeT<Real>* pb = self.parents.size() > 2 ? grad_target(self, 2) : nullptr;
        std::vector<Real> colv(static_cast<std::size_t>(kk * p));
        std::vector<double> tmp;
        std::vector<double> dw_acc;
        std::vector<Real> wt;
        if (pw) dw_acc.assign(static_cast<std::size_t>(cout * kk), 0.0);
        if (px) wt = detail::transpose(ws.data(), cout, kk);
        for (Index n = 0; n < n_batch; ++n) {
          const Real* gn = g.data() + n * cout * p;
          if (pw) {
            detail::im2col(xs.data() + n * cin * h * w, cin, h, w, k, stride, pad, oh, ow, colv.data());
            auto col_t = detail::transpose(colv.data(), kk, p);
            tmp.resize(static_cast<std::size_t>(cout * kk));
            detail::gemm(gn, col_t.data(), tmp.data(), cout, p, kk);
            for (std::size_t i = 0; i < tmp.size(); ++i) dw_acc[i] += tmp[i];
          }
          if (px) {
            tmp.resize(static_cast<std::size_t>(kk * p));
            detail::gemm(wt.data(), gn, tmp.data(), kk, cout, p);
            std::vector<double> img(static_cast<std::size_t>(cin * h * w), 0.0);
            detail::col2im(tmp.data(), cin, h, w, k, stride, pad, oh, ow, img.data());
            auto& gx = px->ensure_grad();
            Real* dst = gx.data() + n * cin * h * w;
            for (std::size_t i = 0; i < img.size(); ++i) dst[i] += static_cast<Real>(img[i]);
          }
        }
        if (pw) {
          auto& gw = pw->ensure_grad();
          for (std::size_t i = 0; i < dw_acc.size(); ++i) gw[i] += static_cast<Real>(dw_acc[i]);
        }
        if (pb) {
          auto& gb = pb->ensure_grad();
          for (Index c = 0; c < cout; ++c) {
            double s = 0;
            for (Index n = 0; n < n_batch; ++n) {
              for (Index i = 0; i < p; ++i) s += g[(n * cout + c) * p + i];
            }
            gb[c] += static_cast<Real>(s);
          }
        }
      });
}

template <typename Real>
BasicTensor<Real> conv2d_transpose(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                                   const BasicTensor<Real>& bias, ConvTransposeOptions options) {
  const char* op = "conv2d_transpose";
  if (x.rank() != 4 || (weight.rank() != 4 && weight.rank() != 5)) {
    conv_error(op, "expected rank-4 input and rank-4/5 weight", x.shape(), weight.shape());
  }
  if (options.stride < 1 || options.pad < 0 || options.output_padding < 0 ||
      options.output_padding >= options.stride) {
    conv_error(op, "invalid stride/pad/output_padding", x.shape(), weight.shape());
  }
  const bool per_sample = weight.rank() == 5;
  const std::size_t off = per_sample ? 1 : 0;
  const Index n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (per_sample && weight.dim(0) != n_batch) conv_error(op, "per-sample weight batch mismatch", x.shape(), weight.shape());
  const Index cout = weight.dim(off + 1), k = weight.dim(off + 2);
  if (weight.dim(off) != cin || weight.dim(off + 3) != k) conv_error(op, "channel/kernel mismatch", x.shape(), weight.shape());
  check_bias(op, bias, cout);
  const Index stride = options.stride, pad = options.pad;
  const Index oh = (h - 1) * stride - 2 * pad + k + options.output_padding;
  const Index ow = (w - 1) * stride - 2 * pad + k + options.output_padding;
  if (oh <= 0 || ow <= 0) conv_error(op, "empty output", x.shape(), weight.shape());
  const Index ckk = cout * k * k;
  const Index pin = h * w;
  const Index pout = oh * ow;
  const Index wsize = cin * ckk;

  std::vector<Real> out(static_cast<std::size_t>(n_batch * cout * pout));
  std::vector<double> col(static_cast<std::size_t>(ckk * pin));
  std::vector<double> img(static_cast<std::size_t>(cout * pout));
  const auto xv = x.data();
  const auto wv = weight.data();
  std::vector<Real> wt;
  for (Index n = 0; n < n_batch; ++n) {
    if (n == 0 || per_sample) wt = detail::transpose(wv.data() + (per_sample ? n * wsize : 0), cin, ckk);
    detail::gemm(wt.data(), xv.data() + n * cin * pin, col.data(), ckk, cin, pin);
    std::fill(img.begin(), img.end(), 0.0);
    // The transposed conv output plays the role of the "image" in col2im.
    detail::col2im(col.data(), cout, oh, ow, k, stride, pad, h, w, img.data());
    for (Index c = 0; c < cout; ++c) {
      const double b = bias.defined() ? static_cast<double>(bias.data()[c]) : 0.0;
      Real* dst = out.data() + (n * cout + c) * pout;
      for (Index i = 0; i < pout; ++i) dst[i] = static_cast<Real>(img[c * pout + i] + b);
    }
  }

  std::vector<BasicTensor<Real>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return BasicTensor<Real>::make_result(
      Shape{n_batch, cout, oh, ow}, std::move(out), op, std::move(parents),
      [=](NodeT<Real>& self) {
        const auto& g = self.grad;
        const auto& xs = self.parents[0]->data;
        const auto& ws = self.parents[1]->data;
        auto* px = grad_target(self, 0);
        auto* pw = grad_target(self, 1);
        NodeT<Real>* pb = self.parents.size() > 2 ? grad_target(self, 2) : nullptr;
        std::vector<Real> gcol(static_cast<std::size_t>(ckk * pin));
        std::vector<double> tmp;
        std::vector<double> dw_acc;
        if (pw) dw_acc.assign(static_cast<std::size_t>(per_sample ? n_batch * wsize : wsize), 0.0);
        for (Index n = 0; n < n_batch; ++n) {
          // gcol[(c,ky,kx)][iy,ix] = dL/dout at the position input (iy,ix) feeds.
          detail::im2col(g.data() + n * cout * pout, cout, oh, ow, k, stride, pad, h, w, gcol.data());
          if (px) {
            tmp.resize(static_cast<std::size_t>(cin * pin));
            detail::gemm(ws.data() + (per_sample ? n * wsize : 0), gcol.data(), tmp.data(), cin, ckk, pin);
            auto& gx = px->ensure_grad();
            Real* dst = gx.data() + n * cin * pin;
            for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += static_cast<Real>(tmp[i]);
          }
          if (pw) {
            auto gcol_t = detail::transpose(gcol.data(), ckk, pin);
            tmp.resize(static_cast<std::size_t>(wsize));
            detail::gemm(xs.data() + n * cin * pin, gcol_t.data(), tmp.data(), cin, pin, ckk);
            double* dst = dw_acc.data() + (per_sample ? n * wsize : 0);
            for (Index i = 0; i < wsize; ++i) dst[i] += tmp[i];
          }
        }
        if (pw) {
          auto& gw = pw->ensure_grad();
          for (std::size_t i = 0; i < dw_acc.size(); ++i) gw[i] += static_cast<Real>(dw_acc[i]);
        }
        if (pb) {
          auto& gb = pb->ensure_grad();
          for (Index c = 0; c < cout; ++c) {
            double s = 0;
            for (Index n = 0; n < n_batch; ++n) {
              for (Index i = 0; i < pout; ++i) s += g[(n * cout + c) * pout + i];
            }
            gb[c] += static_cast<Real>(s);
          }
        }
      });
}

namespace {

// Raster-causal taps of a k x k kernel: rows above the centre, and the
// centre row strictly left of the centre.
inline bool causal_tap(Index ky, Index kx, Index centre) {
  return ky < centre || (ky == centre && kx < centre);
}

template <typename Real>
void check_masked(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                  const BasicTensor<Real>& bias) {
  const char* op = "masked_conv2d";
  if (x.rank() != 4 || weight.rank() != 4) conv_error(op, "expected rank-4 tensors", x.shape(), weight.shape());
  const Index k = weight.dim(2);
  if (weight.dim(1) != x.dim(1) || weight.dim(3) != k || k % 2 == 0) {
    conv_error(op, "channel mismatch or even kernel", x.shape(), weight.shape());
  }
  check_bias(op, bias, weight.dim(0));
}

// One output value; shared by the full op and the single-position query so
// both perform the same arithmetic in the same order.
template <typename Real>
Real masked_point(const Real* xn, const Real* wc, double bias, Index cin, Index h, Index w, Index k,
                  Index y, Index x) {
  const Index centre = k / 2;
  double acc = 0.0;
  for (Index ic = 0; ic < cin; ++ic) {
    for (Index ky = 0; ky <= centre; ++ky) {
      const Index iy = y - centre + ky;
      if (iy < 0 || iy >= h) continue;
      for (Index kx = 0; kx < k; ++kx) {
        if (!causal_tap(ky, kx, centre)) break;
        const Index ix = x - centre + kx;
        if (ix < 0 || ix >= w) continue;
        acc += static_cast<double>(wc[(ic * k + ky) * k + kx]) *
               static_cast<double>(xn[(ic * h + iy) * w + ix]);
      }
    }
  }
  return static_cast<Real>(acc + bias);
}

}  // namespace

template <typename Real>
BasicTensor<Real> masked_conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                                const BasicTensor<Real>& bias) {
  check_masked(x, weight, bias);
  const Index n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = weight.dim(0), k = weight.dim(2);
  const Index centre = k / 2;
  const auto xv = x.data();
  const auto wv = weight.data();
  std::vector<Real> out(static_cast<std::size_t>(n_batch * cout * h * w));
  for (Index n = 0; n < n_batch; ++n) {
    for (Index c = 0; c < cout; ++c) {
      const double b = bias.defined() ? static_cast<double>(bias.data()[c]) : 0.0;
      for (Index y = 0; y < h; ++y) {
        for (Index xx = 0; xx < w; ++xx) {
          out[((n * cout + c) * h + y) * w + xx] =
              masked_point(xv.data() + n * cin * h * w, wv.data() + c * cin * k * k, b, cin, h, w, k, y, xx);
        }
      }
    }
  }
  std::vector<BasicTensor<Real>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return BasicTensor<Real>::make_result(
      Shape{n_batch, cout, h, w}, std::move(out),
      "masked_conv2d", std::move(parents), [=](NodeT<Real>& self) {
        const auto& g = self.grad;
        const auto& xs = self.parents[0]->data;
        const auto& ws = self.parents[1]->data;
        auto* px = grad_target(self, 0);
        auto* pw = grad_target(self, 1);
        NodeT<Real>* pb = self.parents.size() > 2 ? grad_target(self, 2) : nullptr;
        std::vector<double> gx_acc(px ? xs.size() : 0, 0.0);
        std::vector<double> gw_acc(pw ? ws.size() : 0, 0.0);
        for (Index n = 0; n < n_batch; ++n) {
          for (Index c = 0; c < cout; ++c) {
            for (Index y = 0; y < h; ++y) {
              for (Index xx = 0; xx < w; ++xx) {
                const double go = g[((n * cout + c) * h + y) * w + xx];
                if (go == 0.0) continue;
                for (Index ic = 0; ic < cin; ++ic) {
                  for (Index ky = 0; ky <= centre; ++ky) {
                    const Index iy = y - centre + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (Index kx = 0; kx < k; ++kx) {
                      if (!causal_tap(ky, kx, centre)) break;
                      const Index ix = xx - centre + kx;
                      if (ix < 0 || ix >= w) continue;
                      const Index xi = ((n * cin + ic) * h + iy) * w + ix;
                      const Index wi = ((c * cin + ic) * k + ky) * k + kx;
                      if (px) gx_acc[xi] += go * ws[wi];
                      if (pw) gw_acc[wi] += go * xs[xi];
                    }
                  }
                }
              }
            }
          }
        }
        if (px) {
          auto& gx = px->ensure_grad();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += static_cast<Real>(gx_acc[i]);
        }
        if (pw) {
          auto& gw = pw->ensure_grad();
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += static_cast<Real>(gw_acc[i]);
        }
        if (pb) {
          auto& gb = pb->ensure_grad();
          for (Index c = 0; c < cout; ++c) {
            double s = 0;
            for (Index n = 0; n < n_batch; ++n) {
              for (Index i = 0; i < h * w; ++i) s += g[(n * cout + c) * h * w + i];
            }
            gb[c] += static_cast<Real>(s);
          }
        }
      });
}

template <typename Real>
void masked_conv2d_at(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                      const BasicTensor<Real>& bias, Index n, Index y, Index x_pos,
                      std::span<Real> out) {
  check_masked(x, weight, bias);
  const Index cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = weight.dim(0), k = weight.dim(2);
  if (n < 0 || n >= x.dim(0) || y < 0 || y >= h || x_pos < 0 || x_pos >= w) {
    throw ShapeError("masked_conv2d_at: position out of range for " + to_string(x.shape()));
  }
  if (static_cast<Index>(out.size()) != cout) {
    throw ShapeError("masked_conv2d_at: output span size does not match channel count");
  }
  const auto xv = x.data();
  const auto wv = weight.data();
  for (Index c = 0; c < cout; ++c) {
    const double b = bias.defined() ? static_cast<double>(bias.data()[c]) : 0.0;
    out[c] = masked_point(xv.data() + n * cin * h * w, wv.data() + c * cin * k * k, b, cin, h, w, k, y, x_pos);
  }
}

#define NSX_INSTANTIATE_CONV(Real)                                                               \
  template BasicTensor<Real> conv2d(const BasicTensor<Real>&, const BasicTensor<Real>&,          \
                                    const BasicTensor<Real>&, ConvOptions);                      \
  template BasicTensor<Real> conv2d_transpose(const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                              const BasicTensor<Real>&, ConvTransposeOptions);   \
  template BasicTensor<Real> masked_conv2d(const BasicTensor<Real>&, const BasicTensor<Real>&,   \
                                           const BasicTensor<Real>&);                            \
  template void masked_conv2d_at(const BasicTensor<Real>&, const BasicTensor<Real>&,             \
                                 const BasicTensor<Real>&, Index, Index, Index, std::span<Real>);

NSX_INSTANTIATE_CONV(float)
NSX_INSTANTIATE_CONV(double)

}  // namespace nsx
