#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cagrad {

// Deterministic counter-free random stream (splitmix64). Every stochastic
// choice in the library draws from one of these so runs are reproducible
// bit-for-bit from a single seed, independent of platform library details.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Standard normal via Box-Muller; always consumes exactly two draws.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-53));
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::next_below: n == 0");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      auto j = next_below(static_cast<std::uint64_t>(i) + 1);
      std::swap(p[static_cast<std::size_t>(i)], p[j]);
    }
    return p;
  }

  // k distinct indices from 0..n-1, uniform without replacement, sorted.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t state_;
};

inline std::vector<int> RngStream::sample_without_replacement(int n, int k) {
  if (k < 0 || k > n) {
    throw std::invalid_argument("sample_without_replacement: k out of range");
  }
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto j = next_below(pool.size());
    out.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Derives an independent stream for run `index` under a base seed.
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t index) {
  RngStream mixer(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
  return RngStream(mixer.next_u64());
}

}  // namespace cagrad
