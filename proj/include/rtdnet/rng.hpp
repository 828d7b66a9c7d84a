// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace rtdnet {

// Deterministic, splittable random stream. Every source of randomness in the
// pipeline derives from one root seed via split(), so a fixed seed pins the
// whole run bit-for-bit. Normal deviates use the Marsaglia polar method; no
// standard-library distribution objects are involved, keeping the stream
// independent of the C++ runtime in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Child stream derived from this stream's seed and a tag. Splitting is a
  // pure function of (seed, tag): it does not consume state.
  Rng split(std::string_view tag) const;
  Rng split(std::string_view tag, std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double normal();                        // standard normal
  double normal(double mean, double sd) { return mean + sd * normal(); }
  int below(int n);                       // uniform integer in [0, n)

  void fill_normal(double* out, long n);
  void shuffle(std::vector<int>& v);
  // k distinct indices drawn uniformly from [0, n), in random order.
  std::vector<int> choose(int n, int k);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_[2] = {0, 0};  // xoshiro-style splitmix-seeded state
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rtdnet
