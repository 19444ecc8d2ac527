#pragma once
#include <cstdint>

namespace demlab {

// Counter-based pseudo-random generator built on the splitmix64 finalizer.
// Every draw is a pure function of (key, counter), so independent streams can
// be derived for grid cells, pulses, or optimizer restarts and the results do
// not depend on evaluation order. The output sequence is pinned: changing the
// constants below is a breaking change for every golden file and seeded test.
inline constexpr std::uint32_t kRngVersion = 1;

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Hash a (seed, stream) pair into a stream key.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t start = 0)
      : key_(key), ctr_(start) {}

  static CounterRng for_stream(std::uint64_t seed, std::uint64_t stream) {
    return CounterRng(derive_stream(seed, stream));
  }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(ctr_++)); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform integer in [0, n) for small n; n must not exceed 2^32.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>((next_u64() >> 32) % n);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace demlab
