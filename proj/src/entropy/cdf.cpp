#include "nsx/entropy/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsx {

double QuantizedCdf::probability(std::int32_t symbol) const {
  if (!contains(symbol)) return 0.0;
  return static_cast<double>(freq(static_cast<std::size_t>(symbol - offset))) / kCdfTotal;
}

QuantizedCdf quantize_pmf(std::span<const double> pmf, std::int32_t offset) {
  const std::size_t n = pmf.size();
  if (n == 0) throw EntropyError("cdf: empty support");
  if (n >= kCdfTotal) throw EntropyError("cdf: support of " + std::to_string(n) + " symbols is too wide");
  double total = 0;
  for (double p : pmf) {
    if (!(p >= 0) || !std::isfinite(p)) throw EntropyError("cdf: invalid probability");
    total += p;
  }
  const std::uint32_t spare = kCdfTotal - static_cast<std::uint32_t>(n);
  std::vector<std::uint32_t> freq(n, 1);
  std::uint32_t assigned = static_cast<std::uint32_t>(n);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = total > 0 ? pmf[i] / total : 1.0 / static_cast<double>(n);
    const auto extra = std::min<std::uint32_t>(spare, static_cast<std::uint32_t>(std::floor(p * spare)));
    freq[i] += extra;
    assigned += extra;
    if (pmf[i] > pmf[peak]) peak = i;
  }
  // Rounding of the normalised p can overshoot by a count in pathological
  // cases; take it back from the largest bucket.
  if (assigned > kCdfTotal) {
    freq[peak] -= assigned - kCdfTotal;
  } else {
    freq[peak] += kCdfTotal - assigned;
  }
  QuantizedCdf out;
  out.offset = offset;
  out.cdf.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) out.cdf[i + 1] = out.cdf[i] + freq[i];
  return out;
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

double gaussian_bin_mass(double v, double mu, double sigma) {
  const double d = std::abs(v - mu);
  return normal_cdf((0.5 - d) / sigma) - normal_cdf((-0.5 - d) / sigma);
}

QuantizedCdf build_gaussian_cdf(double mu, double sigma, std::int32_t lo, std::int32_t hi) {
  if (hi < lo) throw EntropyError("cdf: empty support");
  sigma = std::max(sigma, kSigmaMin);
  std::vector<double> pmf(static_cast<std::size_t>(hi - lo) + 1);
  for (std::int32_t v = lo; v <= hi; ++v) {
    double p;
    if (lo == hi) {
      p = 1.0;
    } else if (v == lo) {
      p = normal_cdf((lo + 0.5 - mu) / sigma);
    } else if (v == hi) {
      p = normal_cdf(-(hi - 0.5 - mu) / sigma);
    } else {
      p = gaussian_bin_mass(v, mu, sigma);
    }
    pmf[static_cast<std::size_t>(v - lo)] = p;
  }
  return quantize_pmf(pmf, lo);
}

}  // namespace nsx
