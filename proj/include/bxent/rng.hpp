#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace bxent {

/// Seeded generator with platform-independent derived distributions.
///
/// std::mt19937_64's output sequence is fixed by the standard, but the
/// std distributions are not, so every variate used for sampling is derived
/// here from raw 64-bit draws. Two runs with the same seed produce the same
/// cases on any conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0. Lemire's unbiased method.
  std::size_t index(std::size_t n);

  double normal();

  /// Gamma(shape, 1) variate.
  double gamma(double shape);

  /// log of a Gamma(shape, 1) variate; stays finite for very small shapes.
  double log_gamma_variate(double shape);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

  /// splitmix64 mix of (seed, stream): independent sub-seeds for rows, attempts, users.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace bxent
