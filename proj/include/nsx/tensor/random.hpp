#pragma once

#include <cstdint>
#include <random>

#include "nsx/tensor/tensor.hpp"

namespace nsx {

/// Seeded generator with platform-independent output.
///
/// std::mt19937_64 is fully specified by the standard; the distributions in
/// <random> are not, so uniform and normal variates are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }

  /// Independent child stream; mixing keeps children of nearby seeds apart.
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

template <typename Real>
BasicTensor<Real> uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  std::vector<Real> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<Real>(rng.uniform(lo, hi));
  return BasicTensor<Real>(std::move(shape), std::move(values));
}

template <typename Real>
BasicTensor<Real> normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<Real> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<Real>(stddev * rng.normal());
  return BasicTensor<Real>(std::move(shape), std::move(values));
}

}  // namespace nsx
