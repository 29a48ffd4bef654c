#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace wordacq {

// Deterministic random source. All sampling helpers are written out by hand
// because std::uniform_int_distribution and friends are not pinned by the
// standard; mt19937_64 itself is. Every stochastic choice in the pipeline
// flows through one of these helpers so reruns are reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_material_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound) by rejection sampling.
  uint64_t next_below(uint64_t bound) {
    if (bound == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Box-Muller, no cached spare (keeps the draw count predictable).
  double next_gaussian() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Index into cumulative weights (unnormalized); cum must be nondecreasing.
  size_t next_weighted(const std::vector<double>& cum) {
    const double x = next_double() * cum.back();
    size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
      const size_t mid = (lo + hi) / 2;
      if (cum[mid] <= x)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  // k distinct indices from [0, n), in sorted order (selection sampling).
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    std::vector<size_t> out;
    out.reserve(k);
    size_t remaining = n, needed = k;
    for (size_t i = 0; i < n && needed > 0; ++i) {
      if (next_below(remaining) < needed) {
        out.push_back(i);
        --needed;
      }
      --remaining;
    }
    return out;
  }

  // Independent child stream; splitmix64 over (original seed, tag).
  Rng derive(uint64_t tag) const {
    uint64_t z = seed_material_ + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_material_;
};

}  // namespace wordacq
