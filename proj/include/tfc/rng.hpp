#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tfc {

// Portable pseudo-random source. The bit stream is fully specified so runs
// reproduce across compilers and standard libraries:
//
//   * state: xoshiro256** (Blackman & Vigna), four 64-bit words;
//   * seeding: the four words are successive outputs of splitmix64 started
//     at `seed` (z += 0x9e3779b97f4a7c15; z = (z ^ z>>30) * 0xbf58476d1ce4e5b9;
//     z = (z ^ z>>27) * 0x94d049bb133111eb; out = z ^ z>>31);
//   * uniform(): (next_u64() >> 11) * 2^-53, in [0, 1);
//   * below(n): Lemire's multiply-shift with rejection, unbiased;
//   * normal(): Box-Muller on two uniform() draws, cosine branch only, so
//     every normal consumes exactly two words.
//
// std:: distributions are deliberately not used; their output is
// implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  // Independent stream for (seed, a, b), e.g. (global seed, epoch, sample).
  static SeededRng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
  double normal(double mean = 0.0, double stddev = 1.0) noexcept;

  // Fisher-Yates using below().
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace tfc
