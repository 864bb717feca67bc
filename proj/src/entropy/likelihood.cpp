#include "nsx/entropy/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "nsx/tensor/ops.hpp"

namespace nsx {

namespace {

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

template <typename Real>
void require_same_shape(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

template <typename Real>
BasicTensor<Real> gaussian_likelihood(const BasicTensor<Real>& y, const BasicTensor<Real>& mu,
                                      const BasicTensor<Real>& sigma) {
  require_same_shape("gaussian_likelihood", y, mu);
  require_same_shape("gaussian_likelihood", y, sigma);
  const auto yv = y.data(), mv = mu.data(), sv = sigma.data();
  std::vector<Real> out(yv.size());
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double s = std::max(static_cast<double>(sv[i]), kSigmaMin);
    out[i] = static_cast<Real>(gaussian_bin_mass(yv[i], mv[i], s));
  }
  auto p = BasicTensor<Real>::make_result(
      y.shape(), std::move(out), "gaussian_likelihood", {y, mu, sigma}, [](detail::Node<Real>& self) {
        auto& ys = self.parents[0]->data;
        auto& ms = self.parents[1]->data;
        auto& ss = self.parents[2]->data;
        auto* gy = self.parents[0]->requires_grad ? &self.parents[0]->ensure_grad() : nullptr;
        auto* gm = self.parents[1]->requires_grad ? &self.parents[1]->ensure_grad() : nullptr;
        auto* gs = self.parents[2]->requires_grad ? &self.parents[2]->ensure_grad() : nullptr;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double raw_s = ss[i];
          const double s = std::max(raw_s, kSigmaMin);
          const double a = (static_cast<double>(ys[i]) - ms[i] + 0.5) / s;
          const double b = (static_cast<double>(ys[i]) - ms[i] - 0.5) / s;
          const double pa = normal_pdf(a), pb = normal_pdf(b);
          const double g = self.grad[i];
          const double dy = (pa - pb) / s;
          if (gy) (*gy)[i] += static_cast<Real>(g * dy);
          if (gm) (*gm)[i] += static_cast<Real>(-g * dy);
          if (gs && raw_s > kSigmaMin) (*gs)[i] += static_cast<Real>(g * (b * pb - a * pa) / s);
        }
      });
  return likelihood_floor(p);
}

template <typename Real>
BasicTensor<Real> likelihood_floor(const BasicTensor<Real>& p) {
  const auto pv = p.data();
  std::vector<Real> out(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) out[i] = std::max(pv[i], static_cast<Real>(kLikelihoodFloor));
  return BasicTensor<Real>::make_result(p.shape(), std::move(out), "likelihood_floor", {p},
                                        [](detail::Node<Real>& self) {
                                          auto& parent = *self.parents[0];
                                          auto& g = parent.ensure_grad();
                                          for (std::size_t i = 0; i < g.size(); ++i) {
                                            const bool active = parent.data[i] >= static_cast<Real>(kLikelihoodFloor);
                                            if (active || self.grad[i] < 0) g[i] += self.grad[i];
                                          }
                                        });
}

template <typename Real>
BasicTensor<Real> rate_bits(const BasicTensor<Real>& likelihoods) {
  double bits = 0;
  // NaN passes through so a diverged forward pass surfaces as a NaN loss.
  for (Real p : likelihoods.data()) {
    if (p <= 0 || std::isinf(static_cast<double>(p))) throw EntropyError("rate_bits: nonpositive likelihood");
    bits -= std::log2(static_cast<double>(p));
  }
  return BasicTensor<Real>::make_result(Shape{1}, {static_cast<Real>(bits)}, "rate_bits", {likelihoods},
                                        [](detail::Node<Real>& self) {
                                          auto& parent = *self.parents[0];
                                          auto& g = parent.ensure_grad();
                                          const double scale = -self.grad[0] / std::numbers::ln2;
                                          for (std::size_t i = 0; i < g.size(); ++i) {
                                            g[i] += static_cast<Real>(scale / parent.data[i]);
                                          }
                                        });
}

template <typename Real>
FactorizedParams<Real> FactorizedParams<Real>::init(Index channels, Rng& rng, double init_scale) {
  FactorizedParams p;
  const double scale = std::pow(init_scale, 1.0 / kStages);
  for (int k = 0; k < kStages; ++k) {
    const Index in = kWidths[k], out = kWidths[k + 1];
    const double h = std::log(std::expm1(1.0 / scale / static_cast<double>(out)));
    p.h_raw[k] = BasicTensor<Real>(Shape{channels, out, in}, static_cast<Real>(h));
    p.bias[k] = uniform_tensor<Real>({channels, out}, -0.5, 0.5, rng);
    if (k < kStages - 1) p.gate[k] = BasicTensor<Real>(Shape{channels, out}, Real(0));
  }
  return p;
}

template <typename Real>
BasicTensor<Real> factorized_logits(const BasicTensor<Real>& x, const FactorizedParams<Real>& params) {
  const Index c = params.channels();
  if (x.rank() != 2 || x.dim(0) != c) {
    throw ShapeError("factorized_logits: input " + to_string(x.shape()) + " for " + std::to_string(c) + " channels");
  }
  const Index len = x.dim(1);
  auto h = reshape(x, Shape{c, 1, len});
  for (int k = 0; k < FactorizedParams<Real>::kStages; ++k) {
    h = add_prefix(bmm(softplus(params.h_raw[k]), h), params.bias[k]);
    if (k < FactorizedParams<Real>::kStages - 1) h = add(h, mul_prefix(tanh(h), tanh(params.gate[k])));
  }
  return reshape(h, Shape{c, len});
}

template <typename Real>
BasicTensor<Real> factorized_likelihood(const BasicTensor<Real>& z, const FactorizedParams<Real>& params) {
  const Index c = params.channels();
  if (z.rank() != 4 || z.dim(1) != c) {
    throw ShapeError("factorized_likelihood: input " + to_string(z.shape()) + " for " + std::to_string(c) +
                     " channels");
  }
  const Index n = z.dim(0), hw = z.dim(2) * z.dim(3);
  std::vector<BasicTensor<Real>> parts;
  for (Index i = 0; i < n; ++i) {
    const auto zi = reshape(slice_batch(z, i, i + 1), Shape{c, hw});
    const auto upper = factorized_logits(add_scalar(zi, Real(0.5)), params);
    const auto lower = factorized_logits(add_scalar(zi, Real(-0.5)), params);
    // Evaluate on the side where both sigmoids are small to avoid cancellation.
    std::vector<Real> sign(static_cast<std::size_t>(c * hw));
    for (std::size_t j = 0; j < sign.size(); ++j) sign[j] = upper.data()[j] + lower.data()[j] > 0 ? Real(-1) : Real(1);
    const BasicTensor<Real> s(Shape{c, hw}, std::move(sign));
    const auto p = abs(sub(sigmoid(mul(upper, s)), sigmoid(mul(lower, s))));
    parts.push_back(reshape(likelihood_floor(p), Shape{1, c, z.dim(2), z.dim(3)}));
  }
  return n == 1 ? parts[0] : concat_batch(parts);
}

FactorizedParams<float> make_factorized(ParameterStore& store, const std::string& prefix, Index channels,
                                        Rng& rng) {
  auto p = FactorizedParams<float>::init(channels, rng);
  for (int k = 0; k < FactorizedParams<float>::kStages; ++k) {
    p.h_raw[k] = store.add(prefix + ".h" + std::to_string(k), p.h_raw[k]);
    p.bias[k] = store.add(prefix + ".b" + std::to_string(k), p.bias[k]);
    if (k < FactorizedParams<float>::kStages - 1) p.gate[k] = store.add(prefix + ".a" + std::to_string(k), p.gate[k]);
  }
  return p;
}

namespace {

// Scalar double-precision evaluation of one channel's logit network.
class ChannelCdf {
 public:
  ChannelCdf(const FactorizedParams<float>& p, Index channel) {
    for (int k = 0; k < FactorizedParams<float>::kStages; ++k) {
      const Index in = FactorizedParams<float>::kWidths[k], out = FactorizedParams<float>::kWidths[k + 1];
      for (Index o = 0; o < out; ++o) {
        for (Index i = 0; i < in; ++i) h_[k][o][i] = stable_softplus(p.h_raw[k].at((channel * out + o) * in + i));
        b_[k][o] = p.bias[k].at(channel * out + o);
        if (k < FactorizedParams<float>::kStages - 1) a_[k][o] = std::tanh(static_cast<double>(p.gate[k].at(channel * out + o)));
      }
    }
  }

  double logit(double x) const {
    std::array<double, 3> v{x, 0, 0};
    for (int k = 0; k < FactorizedParams<float>::kStages; ++k) {
      const Index in = FactorizedParams<float>::kWidths[k], out = FactorizedParams<float>::kWidths[k + 1];
      std::array<double, 3> next{};
      for (Index o = 0; o < out; ++o) {
        double s = 0;
        for (Index i = 0; i < in; ++i) s += h_[k][o][i] * v[i];
        s += b_[k][o];
        if (k < FactorizedParams<float>::kStages - 1) s += a_[k][o] * std::tanh(s);
        next[o] = s;
      }
      v = next;
    }
    return v[0];
  }

 private:
  double h_[4][3][3]{};
  double b_[4][3]{};
  double a_[3][3]{};
};

}  // namespace

QuantizedCdf build_factorized_cdf(const FactorizedParams<float>& params, Index channel, std::int32_t lo,
                                  std::int32_t hi) {
  if (hi < lo) throw EntropyError("cdf: empty support");
  if (channel < 0 || channel >= params.channels()) throw EntropyError("cdf: channel out of range");
  const ChannelCdf f(params, channel);
  std::vector<double> pmf(static_cast<std::size_t>(hi - lo) + 1);
  for (std::int32_t v = lo; v <= hi; ++v) {
    double p;
    if (lo == hi) {
      p = 1.0;
    } else if (v == lo) {
      p = sigmoid(f.logit(v + 0.5));
    } else if (v == hi) {
      p = sigmoid(-f.logit(v - 0.5));
    } else {
      const double up = f.logit(v + 0.5), dn = f.logit(v - 0.5);
      const double s = up + dn > 0 ? -1.0 : 1.0;
      p = std::abs(sigmoid(s * up) - sigmoid(s * dn));
    }
    pmf[static_cast<std::size_t>(v - lo)] = p;
  }
  return quantize_pmf(pmf, lo);
}

#define NSX_INSTANTIATE_ENTROPY(Real)                                                                       \
  template BasicTensor<Real> gaussian_likelihood(const BasicTensor<Real>&, const BasicTensor<Real>&,         \
                                                 const BasicTensor<Real>&);                                  \
  template BasicTensor<Real> likelihood_floor(const BasicTensor<Real>&);                                    \
  template BasicTensor<Real> rate_bits(const BasicTensor<Real>&);                                           \
  template struct FactorizedParams<Real>;                                                                   \
  template BasicTensor<Real> factorized_logits(const BasicTensor<Real>&, const FactorizedParams<Real>&);    \
  template BasicTensor<Real> factorized_likelihood(const BasicTensor<Real>&, const FactorizedParams<Real>&);

NSX_INSTANTIATE_ENTROPY(float)
NSX_INSTANTIATE_ENTROPY(double)

}  // namespace nsx
