#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace windtree {

std::uint64_t splitmix64(std::uint64_t& state);

// Order-sensitive hash of a key list; used to derive independent streams.
std::uint64_t hash_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// xoshiro256** with samplers implemented in-library so that sample
/// sequences do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Stream for a tuple of keys, e.g. (master seed, suite id, replicate).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // EXP(1).
  double exponential();
  // EXP(1) conditioned on [0, 1).
  double exponential_below_one();
  // EXP(1) conditioned on [1, inf).
  double exponential_above_one();
  std::uint64_t poisson(double mean);
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace windtree
