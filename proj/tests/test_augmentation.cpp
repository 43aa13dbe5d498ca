#include <doctest.h>

#include <cmath>
#include <set>

#include "tfc/augmentation.hpp"
#include "tfc/errors.hpp"
#include "tfc/fft.hpp"

using namespace tfc;
using namespace tfc::aug;

namespace {

Spectrum real_spectrum(std::size_t n, std::vector<double> amps) {
  Spectrum s{n, {}};
  for (double a : amps) s.bins.emplace_back(a, 0.0);
  return s;
}

std::vector<double> random_signal(std::size_t n, SeededRng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("time augmentations with neutral settings are identities") {
  SeededRng rng(1);
  const auto x = random_signal(32, rng);
  TimeAugPolicy j;
  j.kind = TimeAugKind::jitter;
  j.jitter_sigma = 0.0;
  CHECK(augment_time(x, j, rng) == x);
  TimeAugPolicy s;
  s.kind = TimeAugKind::scaling;
  s.scale_lo = s.scale_hi = 1.0;
  CHECK(augment_time(x, s, rng) == x);
  for (std::ptrdiff_t k : {-5, 0, 3, 31, 40}) CHECK(circular_shift(circular_shift(x, k), -k) == x);
}

TEST_CASE("circular shift moves samples later") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(circular_shift(x, 1) == std::vector<double>{4, 1, 2, 3});
}

TEST_CASE("neighborhood keeps one contiguous window") {
  SeededRng rng(2);
  std::vector<double> x(64, 1.0);
  TimeAugPolicy p;
  p.kind = TimeAugKind::neighborhood;
  p.segment_ratio = 0.75;
  for (int t = 0; t < 50; ++t) {
    const auto y = augment_time(x, p, rng);
    REQUIRE(y.size() == x.size());
    std::size_t kept = 0, runs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0) {
        ++kept;
        if (i == 0 || y[i - 1] == 0.0) ++runs;
      }
    }
    CHECK(kept == 48);
    CHECK(runs == 1);
  }
}

TEST_CASE("time policies are validated") {
  SeededRng rng(3);
  const std::vector<double> x(16, 1.0);
  TimeAugPolicy bad;
  bad.kind = TimeAugKind::time_shift;
  bad.max_shift = 16;
  CHECK_THROWS_AS(augment_time(x, bad, rng), ConfigError);
  TimeAugPolicy neg;
  neg.jitter_sigma = -1.0;
  CHECK_THROWS_AS(augment_time(x, neg, rng), ConfigError);
  TimeAugPolicy sc;
  sc.kind = TimeAugKind::scaling;
  sc.scale_lo = 1.2;
  sc.scale_hi = 1.1;
  CHECK_THROWS_AS(augment_time(x, sc, rng), ConfigError);
  CHECK_THROWS_AS(augment_time(std::vector<double>(3, 1.0), TimeAugPolicy{}, rng), ShapeError);
}

TEST_CASE("augmentations are deterministic given the rng seed") {
  SeededRng a(9), b(9), src(4);
  const auto x = random_signal(64, src);
  for (const auto& p : default_time_bank()) CHECK(augment_time(x, p, a) == augment_time(x, p, b));
  const Spectrum s = forward_fft(x);
  for (const auto& np : enumerate_policies()) {
    CHECK(augment_freq(s, np.policy, a).spectrum.bins ==
          augment_freq(s, np.policy, b).spectrum.bins);
  }
}

TEST_CASE("remove example zeroes the chosen bin") {
  FreqAugPolicy p;
  p.mode = FreqAugMode::remove;
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 64 && !seen; ++seed) {
    SeededRng rng(seed);
    const auto r = augment_freq(real_spectrum(6, {9, 5, 3, 0}), p, rng);
    REQUIRE(r.changed_bins.size() == 1);
    if (r.changed_bins[0] != 2) continue;
    seen = true;
    CHECK(r.spectrum.amplitudes() == std::vector<double>{9, 5, 0, 0});
  }
  CHECK(seen);
}

TEST_CASE("add example raises the chosen bin to alpha times the peak") {
  FreqAugPolicy p;
  p.mode = FreqAugMode::add;
  p.alpha = 0.5;
  std::set<std::size_t> chosen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    SeededRng rng(seed);
    const auto r = augment_freq(real_spectrum(6, {0, 8, 1, 0}), p, rng);
    REQUIRE(r.changed_bins.size() == 1);
    const std::size_t k = r.changed_bins[0];
    chosen.insert(k);
    CHECK(r.spectrum.amplitude(k) == 4.0);
    if (k == 3) CHECK(r.spectrum.amplitudes() == std::vector<double>{0, 8, 1, 4});
  }
  // A_m = 8 leaves bins 2 and 3 eligible; bin 1 is never touched.
  CHECK(chosen == std::set<std::size_t>{2, 3});
}

TEST_CASE("add keeps phase and gives empty bins phase zero") {
  Spectrum s{8, {{0, 0}, {0, 6}, {-1, 1}, {0, 0}, {0, 0}}};
  FreqAugPolicy p;
  p.mode = FreqAugMode::add;
  p.budget = 3;
  SeededRng rng(0);
  const auto r = augment_freq(s, p, rng);
  CHECK(r.changed_bins.size() == 3);
  CHECK(std::abs(r.spectrum.phase(2) - s.phase(2)) < 1e-12);
  CHECK(r.spectrum.bins[3] == Complex(3.0, 0.0));
  CHECK(r.spectrum.bins[4] == Complex(3.0, 0.0));
  CHECK(r.spectrum.bins[1] == s.bins[1]);
}

TEST_CASE("removing an empty bin leaves the signal unchanged") {
  std::vector<double> x(16);
  for (std::size_t t = 0; t < 16; ++t) x[t] = std::cos(2.0 * M_PI * 2.0 * t / 16.0);
  Spectrum s = forward_fft(x);
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    if (k != 2) s.bins[k] = Complex(0.0, 0.0);
  }
  FreqAugPolicy p;
  p.mode = FreqAugMode::remove;
  p.band = Band::high;
  SeededRng rng(1);
  const auto r = augment_freq(s, p, rng);
  const NumArray y = inverse_fft(r.spectrum);
  for (std::size_t t = 0; t < 16; ++t) CHECK(std::abs(y[t] - x[t]) < 1e-9);
}

TEST_CASE("shortfalls warn instead of failing") {
  FreqAugPolicy p;
  p.mode = FreqAugMode::add;
  p.budget = 5;
  SeededRng rng(2);
  const auto r = augment_freq(real_spectrum(6, {0, 8, 1, 0}), p, rng);
  CHECK(r.changed_bins.size() == 2);
  CHECK(r.warning.has_value());

  const auto z = augment_freq(real_spectrum(8, {0, 0, 0, 0, 0}), FreqAugPolicy{FreqAugMode::add}, rng);
  CHECK(z.changed_bins.empty());
  CHECK(z.warning.has_value());
}

TEST_CASE("band ranges exclude DC") {
  CHECK(band_range(128, Band::low) == std::pair<std::size_t, std::size_t>{1, 32});
  CHECK(band_range(128, Band::high) == std::pair<std::size_t, std::size_t>{33, 64});
  CHECK(band_range(128, Band::full) == std::pair<std::size_t, std::size_t>{1, 64});
}

TEST_CASE("eight distinct policies with the expected budgets") {
  const auto ps = enumerate_policies();
  REQUIRE(ps.size() == 8);
  std::set<std::string> names;
  for (const auto& np : ps) {
    names.insert(np.name);
    CHECK(np.policy.alpha == 0.5);
    if (np.name.find("-single-") != std::string::npos) CHECK(np.policy.budget == 1);
    if (np.name.find("-multi-") != std::string::npos) CHECK(np.policy.budget == 5);
  }
  CHECK(names.size() == 8);
  CHECK(names.contains("low-single-uniform"));
  CHECK(names.contains("high-multi-gaussian"));
}

TEST_CASE("frequency augmentation properties on random spectra") {
  SeededRng rng(31);
  std::vector<FreqAugPolicy> policies = default_freq_bank();
  for (const auto& np : enumerate_policies()) policies.push_back(np.policy);
  for (const auto& p : policies) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_signal(64, rng);
      const Spectrum s = forward_fft(x);
      const auto r = augment_freq(s, p, rng);
      std::size_t changed = 0;
      for (std::size_t k = 0; k < s.bins.size(); ++k) {
        if (r.spectrum.bins[k] != s.bins[k]) ++changed;
        if (p.mode == FreqAugMode::add) CHECK(r.spectrum.amplitude(k) >= s.amplitude(k));
        else CHECK(r.spectrum.amplitude(k) <= s.amplitude(k));
      }
      CHECK(changed <= p.budget);
      CHECK(r.spectrum.bins[0] == s.bins[0]);
      const auto full = full_spectrum(r.spectrum);
      for (const auto& v : inverse_dft_complex(full)) CHECK(std::abs(v.imag()) < 1e-9);
      const NumArray y = inverse_fft(r.spectrum);
      if (p.budget == 1 && !r.changed_bins.empty()) CHECK(cosine_similarity(y.data(), x) > 0.0);
    }
  }
}
