#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace smallarea {

/// Seeded random stream used by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived variates (bounded integers, uniforms, normals, gamma,
/// Poisson) are computed here rather than through <random> distributions,
/// whose algorithms are implementation-defined, so draws reproduce exactly
/// across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n). Rejection sampling, no modulo bias. n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double gamma(double shape, double scale);
  std::int64_t poisson(double mean);

  /// Gamma-Poisson mixture with the given mean and size (dispersion) parameter.
  std::int64_t negative_binomial(double mean, double size);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer over (base, stream); gives independent child seeds for
/// per-tree, per-stratum, and per-cell streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Simple random sample without replacement of k indices from [0, population),
/// by partial Fisher-Yates. Returned in selection order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t population, std::size_t k);

}  // namespace smallarea
