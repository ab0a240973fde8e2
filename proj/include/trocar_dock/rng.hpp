#pragma once

#include <cstdint>

namespace trocar_dock {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// Draw k (k = 0, 1, 2, ...) of the stream keyed by `key` is
///
///   x_k = mix64(key + (k + 1) * 0x9E3779B97F4A7C15)           (mod 2^64)
///   mix64(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
///             z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
///             return z ^ (z >> 31);
///
/// The key of (seed, stream) is mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019)).
/// Uniforms take the top 53 bits: u = (x >> 11) * 2^-53, in [0, 1).
/// Normals use the cosine branch of Box-Muller on two consecutive uniforms:
/// sqrt(-2 ln(1 - u1)) * cos(2 pi u2). Any language with 64-bit unsigned
/// wraparound reproduces the same streams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  static std::uint64_t mix64(std::uint64_t z);
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  // Independent child stream; does not advance this generator.
  CounterRng fork(std::uint64_t stream) const { return CounterRng(key_, stream); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace trocar_dock
