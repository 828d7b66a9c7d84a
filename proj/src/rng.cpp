// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/rng.hpp"

#include <cmath>

#include "rtdnet/common.hpp"

namespace rtdnet {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  state_[0] = splitmix64(s);
  state_[1] = splitmix64(s);
  if (state_[0] == 0 && state_[1] == 0) state_[1] = 1;
}

Rng Rng::split(std::string_view tag) const {
  std::uint64_t s = seed_ ^ rotl(fnv1a(tag), 17);
  return Rng(splitmix64(s));
}

Rng Rng::split(std::string_view tag, std::uint64_t index) const {
  std::uint64_t s = seed_ ^ rotl(fnv1a(tag), 17) ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  return Rng(splitmix64(s));
}

std::uint64_t Rng::next_u64() {
  // xoroshiro128++
  const std::uint64_t s0 = state_[0];
  std::uint64_t s1 = state_[1];
  const std::uint64_t result = rotl(s0 + s1, 17) + s0;
  s1 ^= s0;
  state_[0] = rotl(s0, 49) ^ s1 ^ (s1 << 21);
  state_[1] = rotl(s1, 28);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

int Rng::below(int n) {
  if (n <= 0) throw ContractError("Rng::below: n must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<int>(r % bound);
}

void Rng::fill_normal(double* out, long n) {
  for (long i = 0; i < n; ++i) out[i] = normal();
}

void Rng::shuffle(std::vector<int>& v) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = below(i + 1);
    std::swap(v[i], v[j]);
  }
}

std::vector<int> Rng::choose(int n, int k) {
  if (k > n) k = n;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: first k entries are the sample.
  for (int i = 0; i < k; ++i) {
    const int j = i + below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace rtdnet
