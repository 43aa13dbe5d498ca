#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tfc/errors.hpp"
#include "tfc/fft.hpp"
#include "tfc/rng.hpp"

using namespace tfc;

namespace {

std::vector<double> random_signal(std::size_t n, SeededRng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

// Direct summation written independently of the library.
std::vector<Complex> reference_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                         static_cast<double>(n);
      acc += x[t] * Complex(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("constant signal has only a DC component") {
  const std::vector<double> x(8, 2.5);
  const Spectrum s = forward_fft(x);
  REQUIRE(s.bins.size() == 5);
  CHECK(s.bins[0].real() == doctest::Approx(20.0));
  for (std::size_t k = 1; k < s.bins.size(); ++k) CHECK(std::abs(s.bins[k]) < 1e-12);
  const NumArray back = inverse_fft(s);
  for (double v : back.data()) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("cosine at bin 3 of 16") {
  std::vector<double> x(16);
  for (std::size_t t = 0; t < 16; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 3.0 * t / 16.0);
  const Spectrum s = forward_fft(x);
  CHECK(std::abs(s.amplitude(3) - 8.0) < 1e-9);
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    if (k != 3) CHECK(std::abs(s.bins[k]) <= 1e-9);
  }

  Spectrum only3{16, std::vector<Complex>(9)};
  only3.bins[3] = Complex(8.0, 0.0);
  const NumArray y = inverse_fft(only3);
  for (std::size_t t = 0; t < 16; ++t) CHECK(std::abs(y[t] - x[t]) < 1e-12);
}

TEST_CASE("zero signal transforms to zero") {
  const Spectrum s = forward_fft(std::vector<double>(32, 0.0));
  for (const auto& b : s.bins) CHECK(std::abs(b) == 0.0);
}

TEST_CASE("too-short signals are rejected") {
  CHECK_THROWS_AS(forward_fft(std::vector<double>{1.0}), InvalidLengthError);
  CHECK_THROWS_AS(forward_fft(std::vector<double>{}), InvalidLengthError);
}

TEST_CASE("asymmetric spectra are rejected by the inverse") {
  Spectrum s{8, std::vector<Complex>(5)};
  s.bins[0] = Complex(1.0, 0.5);
  CHECK_THROWS_AS(inverse_fft(s), InvalidSpectrumError);
  Spectrum nyq{8, std::vector<Complex>(5)};
  nyq.bins[4] = Complex(0.0, 1.0);
  CHECK_THROWS_AS(inverse_fft(nyq), InvalidSpectrumError);
  Spectrum wrong{8, std::vector<Complex>(4)};
  CHECK_THROWS_AS(inverse_fft(wrong), InvalidSpectrumError);
}

TEST_CASE("fast path matches direct summation and round-trips") {
  SeededRng rng(21);
  for (std::size_t n = 2; n <= 1024; n *= 2) {
    const auto x = random_signal(n, rng);
    const Spectrum fast = forward_fft(x);
    const Spectrum slow = naive_dft(x);
    const auto ref = reference_dft(x);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      CHECK(std::abs(fast.bins[k] - slow.bins[k]) < 1e-9);
      CHECK(std::abs(fast.bins[k] - ref[k]) < 1e-9);
    }
    const NumArray back = inverse_fft(fast);
    for (std::size_t t = 0; t < n; ++t) CHECK(std::abs(back[t] - x[t]) < 1e-9);
  }
}

TEST_CASE("odd and non power-of-two lengths use the direct path") {
  SeededRng rng(4);
  for (std::size_t n : {3u, 5u, 6u, 12u, 100u, 178u}) {
    const auto x = random_signal(n, rng);
    const Spectrum s = forward_fft(x);
    const auto ref = reference_dft(x);
    REQUIRE(s.bins.size() == n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) CHECK(std::abs(s.bins[k] - ref[k]) < 1e-9);
    const NumArray back = inverse_fft(s);
    for (std::size_t t = 0; t < n; ++t) CHECK(std::abs(back[t] - x[t]) < 1e-9);
  }
}

TEST_CASE("parseval holds") {
  SeededRng rng(8);
  for (std::size_t n = 8; n <= 512; n *= 2) {
    const auto x = random_signal(n, rng);
    double energy = 0.0;
    for (double v : x) energy += v * v;
    double spec = 0.0;
    for (const auto& b : full_spectrum(forward_fft(x))) spec += std::norm(b);
    spec /= static_cast<double>(n);
    CHECK(std::abs(spec - energy) / energy < 1e-6);
  }
}

TEST_CASE("full amplitude layout is symmetric") {
  SeededRng rng(9);
  const auto x = random_signal(16, rng);
  const auto amp = full_amplitude(forward_fft(x));
  REQUIRE(amp.size() == 16);
  for (std::size_t k = 1; k < 16; ++k) CHECK(amp[k] == doctest::Approx(amp[16 - k]));
}
