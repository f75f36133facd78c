#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace damagekit {

// Named seed derivation: every consumer gets its own stream from
// (master seed, component name, index), so no global generator exists.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::uint64_t index = 0);

// Portable random stream. Distributions are implemented here rather than with
// <random> distributions, whose outputs differ between standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform01();
  // Uniform in [lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace damagekit
