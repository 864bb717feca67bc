#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsx {

inline constexpr int kCdfPrecision = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfPrecision;
inline constexpr double kSigmaMin = 0.05;
inline constexpr double kLikelihoodFloor = 1e-9;

/// Errors in probability-table construction or symbol coding.
class EntropyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integer CDF over the symbols offset .. offset+size()-1.
///
/// cdf[0] = 0, cdf[size()] = kCdfTotal, strictly increasing, so every symbol
/// in range can be coded. The first and last symbols are the escape buckets
/// that absorb the model's tails.
struct QuantizedCdf {
  std::int32_t offset = 0;
  std::vector<std::uint32_t> cdf;

  std::size_t size() const { return cdf.empty() ? 0 : cdf.size() - 1; }
  std::int32_t lo() const { return offset; }
  std::int32_t hi() const { return offset + static_cast<std::int32_t>(size()) - 1; }
  bool contains(std::int32_t symbol) const { return symbol >= lo() && symbol <= hi(); }
  std::uint32_t freq(std::size_t index) const { return cdf[index + 1] - cdf[index]; }
  /// Model probability of a symbol as coded, freq / 2^16.
  double probability(std::int32_t symbol) const;

  bool operator==(const QuantizedCdf&) const = default;
};

/// freq_i = 1 + floor(p_i * (2^16 - n)) with p normalised to sum 1; the
/// remaining counts go to the first most probable symbol.
QuantizedCdf quantize_pmf(std::span<const double> pmf, std::int32_t offset);

/// Standard normal CDF.
double normal_cdf(double t);

/// Mass of the unit bin around symbol v under N(mu, sigma), computed on the
/// side of the mean where the two CDF values are small.
double gaussian_bin_mass(double v, double mu, double sigma);

/// Table over [lo, hi] for N(mu, max(sigma, kSigmaMin)); the end buckets
/// take the full tails.
QuantizedCdf build_gaussian_cdf(double mu, double sigma, std::int32_t lo, std::int32_t hi);

}  // namespace nsx
