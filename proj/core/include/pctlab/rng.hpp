#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace pctlab {

/// Counter-based generator keyed by (seed, stream).
///
/// Output i of a generator is a pure function of (seed, stream, i), so two
/// generators with different stream ids are independent and any generator
/// can be reconstructed exactly from its key. Normals use Box-Muller on top
/// of the uniform stream so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform in (0, 1]; safe to take the log of.
  double uniform_open0();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Derive an independent generator; does not advance this one.
  [[nodiscard]] Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace pctlab
