#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace pecan {

// SplitMix64 step function. Small, fast, and fully specified, so every value
// drawn anywhere in the pipeline is reproducible bit-for-bit from the seeds
// alone -- no std::mt19937 / distribution implementation differences.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent child seed from (seed, index). Used to give each
// parallel work item (model, trial, ...) its own stream so results do not
// depend on scheduling or worker count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ ((index + 1) * 0xA0761D6478BD642FULL);
  return splitmix64_next(s);
}

class Prng {
 public:
  explicit Prng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return splitmix64_next(state_); }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n = 0 or 1 returns 0.
  std::uint64_t next_below(std::uint64_t n) {
    return n <= 1 ? 0 : next() % n;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace pecan
