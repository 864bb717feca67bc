#include "nsx/tensor/ops.hpp"

#include <cmath>
#include <string>

#include "gemm.hpp"

namespace nsx {

namespace {

template <typename Real>
using NodeT = detail::Node<Real>;

// Parent i of a backward node, or nullptr when it does not need a gradient.
template <typename Real>
NodeT<Real>* grad_target(NodeT<Real>& self, std::size_t i) {
  NodeT<Real>* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename Real>
void check_binary(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape() && b.numel() != 1) shape_mismatch(op, a.shape(), b.shape());
}

template <typename Real, typename Fwd, typename GradA, typename GradB>
BasicTensor<Real> binary(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b,
                         Fwd fwd, GradA grad_a, GradB grad_b) {
  check_binary(op, a, b);
  const bool bcast = a.shape() != b.shape();
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[bcast ? 0 : i]);
  return BasicTensor<Real>::make_result(
      a.shape(), std::move(out), op, {a, b}, [bcast, grad_a, grad_b](NodeT<Real>& self) {
        const auto& x = self.parents[0]->data;
        const auto& y = self.parents[1]->data;
        const auto& g = self.grad;
        if (auto* pa = grad_target(self, 0)) {
          auto& ga = pa->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += grad_a(x[i], y[bcast ? 0 : i], g[i]);
        }
        if (auto* pb = grad_target(self, 1)) {
          auto& gb = pb->ensure_grad();
          if (bcast) {
            double s = 0;
            for (std::size_t i = 0; i < g.size(); ++i) s += grad_b(x[i], y[0], g[i]);
            gb[0] += static_cast<Real>(s);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += grad_b(x[i], y[i], g[i]);
          }
        }
      });
}

// dfdx(x, y) receives the input and the forward output.
template <typename Real, typename Fwd, typename Deriv>
BasicTensor<Real> unary(const char* op, const BasicTensor<Real>& x, Fwd fwd, Deriv dfdx) {
  const auto xv = x.data();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return BasicTensor<Real>::make_result(x.shape(), std::move(out), op, {x},
                                        [dfdx](NodeT<Real>& self) {
                                          auto* p = grad_target(self, 0);
                                          if (!p) return;
                                          auto& gx = p->ensure_grad();
                                          const auto& xs = p->data;
                                          for (std::size_t i = 0; i < gx.size(); ++i) {
                                            gx[i] += self.grad[i] * dfdx(xs[i], self.data[i]);
                                          }
                                        });
}

bool is_prefix(const Shape& prefix, const Shape& shape) {
  if (prefix.size() > shape.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (prefix[i] != shape[i]) return false;
  }
  return true;
}

}  // namespace

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return binary<Real>(
      "add", a, b, [](Real x, Real y) { return x + y; }, [](Real, Real, Real g) { return g; },
      [](Real, Real, Real g) { return g; });
}

template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return binary<Real>(
      "sub", a, b, [](Real x, Real y) { return x - y; }, [](Real, Real, Real g) { return g; },
      [](Real, Real, Real g) { return -g; });
}

template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return binary<Real>(
      "mul", a, b, [](Real x, Real y) { return x * y; },
      [](Real, Real y, Real g) { return g * y; }, [](Real x, Real, Real g) { return g * x; });
}

template <typename Real>
BasicTensor<Real> div(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return binary<Real>(
      "div", a, b, [](Real x, Real y) { return x / y; },
      [](Real, Real y, Real g) { return g / y; },
      [](Real x, Real y, Real g) { return -g * x / (y * y); });
}

template <typename Real>
BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real value) {
  return unary<Real>(
      "add_scalar", a, [value](Real x) { return x + value; }, [](Real, Real) { return Real(1); });
}

template <typename Real>
BasicTensor<Real> scale(const BasicTensor<Real>& a, Real factor) {
  return unary<Real>(
      "scale", a, [factor](Real x) { return x * factor; }, [factor](Real, Real) { return factor; });
}

template <typename Real>
BasicTensor<Real> add_prefix(const BasicTensor<Real>& x, const BasicTensor<Real>& b) {
  if (!is_prefix(b.shape(), x.shape())) shape_mismatch("add_prefix", x.shape(), b.shape());
  const Index outer = b.numel();
  const Index inner = x.numel() / outer;
  const auto xv = x.data();
  const auto bv = b.data();
  std::vector<Real> out(xv.size());
  for (Index o = 0; o < outer; ++o) {
    for (Index i = 0; i < inner; ++i) out[o * inner + i] = xv[o * inner + i] + bv[o];
  }
  return BasicTensor<Real>::make_result(
      x.shape(), std::move(out), "add_prefix", {x, b}, [outer, inner](NodeT<Real>& self) {
        const auto& g = self.grad;
        if (auto* px = grad_target(self, 0)) {
          auto& gx = px->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (auto* pb = grad_target(self, 1)) {
          auto& gb = pb->ensure_grad();
          for (Index o = 0; o < outer; ++o) {
            double s = 0;
            for (Index i = 0; i < inner; ++i) s += g[o * inner + i];
            gb[o] += static_cast<Real>(s);
          }
        }
      });
}

template <typename Real>
BasicTensor<Real> mul_prefix(const BasicTensor<Real>& x, const BasicTensor<Real>& s) {
  if (!is_prefix(s.shape(), x.shape())) shape_mismatch("mul_prefix", x.shape(), s.shape());
  const Index outer = s.numel();
  const Index inner = x.numel() / outer;
  const auto xv = x.data();
  const auto sv = s.data();
  std::vector<Real> out(xv.size());
  for (Index o = 0; o < outer; ++o) {
    for (Index i = 0; i < inner; ++i) out[o * inner + i] = xv[o * inner + i] * sv[o];
  }
  return BasicTensor<Real>::make_result(
      x.shape(), std::move(out), "mul_prefix", {x, s}, [outer, inner](NodeT<Real>& self) {
        const auto& g = self.grad;
        const auto& xs = self.parents[0]->data;
        const auto& ss = self.parents[1]->data;
        if (auto* px = grad_target(self, 0)) {
          auto& gx = px->ensure_grad();
          for (Index o = 0; o < outer; ++o) {
            for (Index i = 0; i < inner; ++i) gx[o * inner + i] += g[o * inner + i] * ss[o];
          }
        }
        if (auto* ps = grad_target(self, 1)) {
          auto& gs = ps->ensure_grad();
          for (Index o = 0; o < outer; ++o) {
            double acc = 0;
            for (Index i = 0; i < inner; ++i) {
              acc += static_cast<double>(g[o * inner + i]) * xs[o * inner + i];
            }
            gs[o] += static_cast<Real>(acc);
          }
        }
      });
}

template <typename Real>
BasicTensor<Real> relu(const BasicTensor<Real>& x) {
  return unary<Real>(
      "relu", x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
BasicTensor<Real> leaky_relu(const BasicTensor<Real>& x, Real slope) {
  return unary<Real>(
      "leaky_relu", x, [slope](Real v) { return v > Real(0) ? v : v * slope; },
      [slope](Real v, Real) { return v > Real(0) ? Real(1) : slope; });
}

template <typename Real>
BasicTensor<Real> abs(const BasicTensor<Real>& x) {
  return unary<Real>(
      "abs", x, [](Real v) { return std::abs(v); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : (v < Real(0) ? Real(-1) : Real(0)); });
}

template <typename Real>
BasicTensor<Real> square(const BasicTensor<Real>& x) {
  return unary<Real>(
      "square", x, [](Real v) { return v * v; }, [](Real v, Real) { return Real(2) * v; });
}

template <typename Real>
BasicTensor<Real> sqrt(const BasicTensor<Real>& x) {
  return unary<Real>(
      "sqrt", x, [](Real v) { return std::sqrt(v); },
      [](Real, Real y) { return Real(0.5) / y; });
}

template <typename Real>
BasicTensor<Real> exp(const BasicTensor<Real>& x) {
  return unary<Real>(
      "exp", x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

template <typename Real>
BasicTensor<Real> log(const BasicTensor<Real>& x) {
  return unary<Real>(
      "log", x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real(1) / v; });
}

template <typename Real>
BasicTensor<Real> tanh(const BasicTensor<Real>& x) {
  return unary<Real>(
      "tanh", x, [](Real v) { return std::tanh(v); },
      [](Real, Real y) { return Real(1) - y * y; });
}

template <typename Real>
BasicTensor<Real> sigmoid(const BasicTensor<Real>& x) {
  return unary<Real>(
      "sigmoid", x,
      [](Real v) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <typename Real>
BasicTensor<Real> softplus(const BasicTensor<Real>& x) {
  return unary<Real>(
      "softplus", x,
      [](Real v) { return v > Real(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](Real v, Real) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      });
}

template <typename Real>
BasicTensor<Real> clamp(const BasicTensor<Real>& x, Real lo, Real hi) {
  return unary<Real>(
      "clamp", x, [lo, hi](Real v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](Real v, Real) { return (v > lo && v < hi) ? Real(1) : Real(0); });
}

template <typename Real>
BasicTensor<Real> sum(const BasicTensor<Real>& x) {
  double acc = 0;
  for (Real v : x.data()) acc += v;
  return BasicTensor<Real>::make_result(
      Shape{1}, {static_cast<Real>(acc)}, "sum", {x}, [](NodeT<Real>& self) {
        auto* p = grad_target(self, 0);
        if (!p) return;
        auto& gx = p->ensure_grad();
        for (auto& g : gx) g += self.grad[0];
      });
}

template <typename Real>
BasicTensor<Real> mean(const BasicTensor<Real>& x) {
  double acc = 0;
  for (Real v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  return BasicTensor<Real>::make_result(
      Shape{1}, {static_cast<Real>(acc / n)}, "mean", {x}, [n](NodeT<Real>& self) {
        auto* p = grad_target(self, 0);
        if (!p) return;
        auto& gx = p->ensure_grad();
        const Real g = static_cast<Real>(self.grad[0] / n);
        for (auto& v : gx) v += g;
      });
}

template <typename Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_mismatch("reshape", x.shape(), shape);
  std::vector<Real> out(x.data().begin(), x.data().end());
  return BasicTensor<Real>::make_result(std::move(shape), std::move(out), "reshape", {x},
                                        [](NodeT<Real>& self) {
                                          auto* p = grad_target(self, 0);
                                          if (!p) return;
                                          auto& gx = p->ensure_grad();
                                          for (std::size_t i = 0; i < gx.size(); ++i) {
                                            gx[i] += self.grad[i];
                                          }
                                        });
}

namespace {

// Batched [g,m,k] x [g,k,n] shared by matmul and bmm.
template <typename Real>
BasicTensor<Real> batched_matmul(const char* op, const BasicTensor<Real>& a,
                                 const BasicTensor<Real>& b, Index groups, Index m, Index k,
                                 Index n, Shape out_shape) {
  std::vector<Real> out(static_cast<std::size_t>(groups * m * n));
  std::vector<double> acc(static_cast<std::size_t>(m * n));
  for (Index g = 0; g < groups; ++g) {
    detail::gemm(a.data().data() + g * m * k, b.data().data() + g * k * n, acc.data(), m, k, n);
    for (Index i = 0; i < m * n; ++i) out[g * m * n + i] = static_cast<Real>(acc[i]);
  }
  return BasicTensor<Real>::make_result(
      std::move(out_shape), std::move(out), op, {a, b}, [groups, m, k, n](NodeT<Real>& self) {
        const auto& g = self.grad;
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        std::vector<double> acc;
        if (auto* pa = grad_target(self, 0)) {
          // dA = dC * B^T
          auto& ga = pa->ensure_grad();
          acc.resize(static_cast<std::size_t>(m * k));
          for (Index gi = 0; gi < groups; ++gi) {
            auto bt = detail::transpose(bv.data() + gi * k * n, k, n);
            detail::gemm(g.data() + gi * m * n, bt.data(), acc.data(), m, n, k);
            for (Index i = 0; i < m * k; ++i) ga[gi * m * k + i] += static_cast<Real>(acc[i]);
          }
        }
        if (auto* pb = grad_target(self, 1)) {
          // dB = A^T * dC
          auto& gb = pb->ensure_grad();
          acc.resize(static_cast<std::size_t>(k * n));
          for (Index gi = 0; gi < groups; ++gi) {
            auto at = detail::transpose(av.data() + gi * m * k, m, k);
            detail::gemm(at.data(), g.data() + gi * m * n, acc.data(), k, m, n);
            for (Index i = 0; i < k * n; ++i) gb[gi * k * n + i] += static_cast<Real>(acc[i]);
          }
        }
      });
}

}  // namespace

template <typename Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_mismatch("matmul", a.shape(), b.shape());
  }
  return batched_matmul("matmul", a, b, 1, a.dim(0), a.dim(1), b.dim(1),
                        Shape{a.dim(0), b.dim(1)});
}

template <typename Real>
BasicTensor<Real> bmm(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    shape_mismatch("bmm", a.shape(), b.shape());
  }
  return batched_matmul("bmm", a, b, a.dim(0), a.dim(1), a.dim(2), b.dim(2),
                        Shape{a.dim(0), a.dim(1), b.dim(2)});
}

template <typename Real>
BasicTensor<Real> linear(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    shape_mismatch("linear", x.shape(), weight.shape());
  }
  const Index batch = x.dim(0);
  const Index in = x.dim(1);
  const Index out_dim = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_dim}) {
    shape_mismatch("linear(bias)", weight.shape(), bias.shape());
  }
  // y^T = W x^T, so every output sums over `in` in ascending order.
  auto xt = detail::transpose(x.data().data(), batch, in);
  std::vector<double> acc(static_cast<std::size_t>(out_dim * batch));
  detail::gemm(weight.data().data(), xt.data(), acc.data(), out_dim, in, batch);
  std::vector<Real> out(static_cast<std::size_t>(batch * out_dim));
  for (Index o = 0; o < out_dim; ++o) {
    const double b = bias.defined() ? static_cast<double>(bias.data()[o]) : 0.0;
    for (Index n = 0; n < batch; ++n) out[n * out_dim + o] = static_cast<Real>(acc[o * batch + n] + b);
  }
  std::vector<BasicTensor<Real>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return BasicTensor<Real>::make_result(
      Shape{batch, out_dim}, std::move(out), "linear", std::move(parents),
      [batch, in, out_dim](NodeT<Real>& self) {
        const auto& g = self.grad;  // [batch, out]
        const auto& xv = self.parents[0]->data;
        const auto& wv = self.parents[1]->data;
        std::vector<double> acc;
        if (auto* px = grad_target(self, 0)) {
          // dx = g W : [batch,out] x [out,in]
          auto& gx = px->ensure_grad();
          acc.resize(static_cast<std::size_t>(batch * in));
          detail::gemm(g.data(), wv.data(), acc.data(), batch, out_dim, in);
          for (Index i = 0; i < batch * in; ++i) gx[i] += static_cast<Real>(acc[i]);
        }
        if (auto* pw = grad_target(self, 1)) {
          // dW = g^T x : [out,batch] x [batch,in]
          auto& gw = pw->ensure_grad();
          auto gt = detail::transpose(g.data(), batch, out_dim);
          acc.resize(static_cast<std::size_t>(out_dim * in));
          detail::gemm(gt.data(), xv.data(), acc.data(), out_dim, batch, in);
          for (Index i = 0; i < out_dim * in; ++i) gw[i] += static_cast<Real>(acc[i]);
        }
        if (self.parents.size() > 2) {
          if (auto* pb = grad_target(self, 2)) {
            auto& gb = pb->ensure_grad();
            for (Index o = 0; o < out_dim; ++o) {
              double s = 0;
              for (Index n = 0; n < batch; ++n) s += g[n * out_dim + o];
              gb[o] += static_cast<Real>(s);
            }
          }
        }
      });
}

template <typename Real>
BasicTensor<Real> global_avg_pool(const BasicTensor<Real>& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool: expected NCHW, got " + to_string(x.shape()));
  const Index nc = x.dim(0) * x.dim(1);
  const Index hw = x.dim(2) * x.dim(3);
  const auto xv = x.data();
  std::vector<Real> out(static_cast<std::size_t>(nc));
  for (Index i = 0; i < nc; ++i) {
    double acc = 0;
    for (Index j = 0; j < hw; ++j) acc += xv[i * hw + j];
    out[i] = static_cast<Real>(acc / static_cast<double>(hw));
  }
  return BasicTensor<Real>::make_result(
      Shape{x.dim(0), x.dim(1)}, std::move(out), "global_avg_pool", {x},
      [nc, hw](NodeT<Real>& self) {
        auto* p = grad_target(self, 0);
        if (!p) return;
        auto& gx = p->ensure_grad();
        for (Index i = 0; i < nc; ++i) {
          const Real g = static_cast<Real>(self.grad[i] / static_cast<double>(hw));
          for (Index j = 0; j < hw; ++j) gx[i * hw + j] += g;
        }
      });
}

namespace {

// Concatenation along `axis` 0 or 1; all other extents must agree.
template <typename Real>
BasicTensor<Real> concat_axis(const char* op, const std::vector<BasicTensor<Real>>& parts,
                              std::size_t axis) {
  if (parts.empty()) throw ShapeError(std::string(op) + ": nothing to concatenate");
  Shape shape = parts[0].shape();
  if (shape.size() <= axis) throw ShapeError(std::string(op) + ": rank too small " + to_string(shape));
  Index total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) shape_mismatch(op, shape, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != shape[d]) shape_mismatch(op, shape, s);
    }
    total += s[axis];
  }
  shape[axis] = total;
  Index outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  Index inner = 1;
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

  std::vector<Index> extents;
  std::vector<Real> out(static_cast<std::size_t>(numel(shape)));
  Index offset = 0;
  for (const auto& p : parts) {
    const Index ext = p.dim(axis);
    extents.push_back(ext);
    const auto pv = p.data();
    for (Index o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * ext * inner, ext * inner,
                  out.begin() + (o * total + offset) * inner);
    }
    offset += ext;
  }
  return BasicTensor<Real>::make_result(
      std::move(shape), std::move(out), op, parts,
      [extents, outer, inner, total](NodeT<Real>& self) {
        Index off = 0;
        for (std::size_t i = 0; i < extents.size(); ++i) {
          const Index ext = extents[i];
          if (auto* p = grad_target(self, i)) {
            auto& gp = p->ensure_grad();
            for (Index o = 0; o < outer; ++o) {
              for (Index j = 0; j < ext * inner; ++j) {
                gp[o * ext * inner + j] += self.grad[(o * total + off) * inner + j];
              }
            }
          }
          off += ext;
        }
      });
}

template <typename Real>
BasicTensor<Real> slice_axis(const char* op, const BasicTensor<Real>& x, std::size_t axis,
                             Index begin, Index end) {
  Shape shape = x.shape();
  if (shape.size() <= axis || begin < 0 || end > shape[axis] || begin >= end) {
    throw ShapeError(std::string(op) + ": invalid range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") for " + to_string(shape));
  }
  const Index full = shape[axis];
  Index outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  Index inner = 1;
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const Index ext = end - begin;
  shape[axis] = ext;
  std::vector<Real> out(static_cast<std::size_t>(outer * ext * inner));
  const auto xv = x.data();
  for (Index o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + (o * full + begin) * inner, ext * inner, out.begin() + o * ext * inner);
  }
  return BasicTensor<Real>::make_result(
      std::move(shape), std::move(out), op, {x}, [outer, inner, ext, full, begin](NodeT<Real>& self) {
        auto* p = grad_target(self, 0);
        if (!p) return;
        auto& gx = p->ensure_grad();
        for (Index o = 0; o < outer; ++o) {
          for (Index j = 0; j < ext * inner; ++j) {
            gx[(o * full + begin) * inner + j] += self.grad[o * ext * inner + j];
          }
        }
      });
}

}  // namespace

template <typename Real>
BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>& parts) {
  return concat_axis("concat_channels", parts, 1);
}

template <typename Real>
BasicTensor<Real> slice_channels(const BasicTensor<Real>& x, Index begin, Index end) {
  return slice_axis("slice_channels", x, 1, begin, end);
}

template <typename Real>
BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>& parts) {
  return concat_axis("concat_batch", parts, 0);
}

template <typename Real>
BasicTensor<Real> slice_batch(const BasicTensor<Real>& x, Index begin, Index end) {
  return slice_axis("slice_batch", x, 0, begin, end);
}

template <typename Real>
BasicTensor<Real> mse(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) shape_mismatch("mse", a.shape(), b.shape());
  return mean(square(sub(a, b)));
}

#define NSX_INSTANTIATE_OPS(Real)                                                              \
  template BasicTensor<Real> add(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> sub(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> mul(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> div(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> add_scalar(const BasicTensor<Real>&, Real);                       \
  template BasicTensor<Real> scale(const BasicTensor<Real>&, Real);                            \
  template BasicTensor<Real> add_prefix(const BasicTensor<Real>&, const BasicTensor<Real>&);   \
  template BasicTensor<Real> mul_prefix(const BasicTensor<Real>&, const BasicTensor<Real>&);   \
  template BasicTensor<Real> relu(const BasicTensor<Real>&);                                   \
  template BasicTensor<Real> leaky_relu(const BasicTensor<Real>&, Real);                       \
  template BasicTensor<Real> abs(const BasicTensor<Real>&);                                    \
  template BasicTensor<Real> square(const BasicTensor<Real>&);                                 \
  template BasicTensor<Real> sqrt(const BasicTensor<Real>&);                                   \
  template BasicTensor<Real> exp(const BasicTensor<Real>&);                                    \
  template BasicTensor<Real> log(const BasicTensor<Real>&);                                    \
  template BasicTensor<Real> tanh(const BasicTensor<Real>&);                                   \
  template BasicTensor<Real> sigmoid(const BasicTensor<Real>&);                                \
  template BasicTensor<Real> softplus(const BasicTensor<Real>&);                               \
  template BasicTensor<Real> clamp(const BasicTensor<Real>&, Real, Real);                      \
  template BasicTensor<Real> sum(const BasicTensor<Real>&);                                    \
  template BasicTensor<Real> mean(const BasicTensor<Real>&);                                   \
  template BasicTensor<Real> reshape(const BasicTensor<Real>&, Shape);                         \
  template BasicTensor<Real> matmul(const BasicTensor<Real>&, const BasicTensor<Real>&);       \
  template BasicTensor<Real> bmm(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> linear(const BasicTensor<Real>&, const BasicTensor<Real>&,        \
                                    const BasicTensor<Real>&);                                 \
  template BasicTensor<Real> global_avg_pool(const BasicTensor<Real>&);                        \
  template BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>&);           \
  template BasicTensor<Real> slice_channels(const BasicTensor<Real>&, Index, Index);           \
  template BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>&);              \
  template BasicTensor<Real> slice_batch(const BasicTensor<Real>&, Index, Index);              \
  template BasicTensor<Real> mse(const BasicTensor<Real>&, const BasicTensor<Real>&);

NSX_INSTANTIATE_OPS(float)
NSX_INSTANTIATE_OPS(double)

}  // namespace nsx
