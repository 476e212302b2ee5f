#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace remgof {

/// Counter-based generator: the i-th draw of stream (seed, key) is a pure
/// function of (seed, key, i), so work keyed by event or replicate index
/// reproduces regardless of execution order. SplitMix64 finalizer over a
/// Weyl sequence.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  double exponential(double rate);

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace remgof
