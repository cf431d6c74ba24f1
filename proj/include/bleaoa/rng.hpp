#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace bleaoa {

/// Seeded RNG with distributions implemented in-house so draws are
/// bit-identical across standard libraries (std::mt19937_64 is specified;
/// std's distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (no cached spare; keeps draws positional).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t k = v.size(); k > 1; --k) {
      std::swap(v[k - 1], v[uniform_int(k)]);
    }
  }

  /// k distinct indices drawn from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                                std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t j = 0; j < n; ++j) pool[j] = j;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k && j < n; ++j) {
    const std::size_t pick = j + uniform_int(n - j);
    std::swap(pool[j], pool[pick]);
    out.push_back(pool[j]);
  }
  return out;
}

}  // namespace bleaoa
