#pragma once

#include <cstdint>
#include <random>

namespace bsnoma {

/// Counter-based seed derivation. A trial's realization depends only on
/// (master, trial, stream), never on how many trials ran before it or on
/// which worker ran it.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream) noexcept;

/// Owned random source. One per worker/user, never shared.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double standard_normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bsnoma
