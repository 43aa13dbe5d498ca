#include "tfc/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tfc/errors.hpp"

namespace tfc {

namespace {

// exp(sign * 2 pi i k / n) for k in [0, n), each entry evaluated directly
// rather than by recurrence.
std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    w[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return w;
}

void radix2_inplace(std::vector<Complex>& a, double sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const std::vector<Complex> w = twiddles(n, sign);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w[k * step];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> direct_transform(std::span<const Complex> in, double sign,
                                      std::size_t out_bins) {
  const std::size_t n = in.size();
  const std::vector<Complex> w = twiddles(n, sign);
  std::vector<Complex> out(out_bins);
  for (std::size_t k = 0; k < out_bins; ++k) {
    Complex acc{};
    for (std::size_t t = 0; t < n; ++t) acc += in[t] * w[(k * t) % n];
    out[k] = acc;
  }
  return out;
}

void require_length(std::size_t n) {
  if (n < 2) {
    throw InvalidLengthError("transform length must be >= 2, got " + std::to_string(n));
  }
}

}  // namespace

std::vector<double> Spectrum::amplitudes() const {
  std::vector<double> out(bins.size());
  std::transform(bins.begin(), bins.end(), out.begin(),
                 [](const Complex& c) { return std::abs(c); });
  return out;
}

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

Spectrum naive_dft(std::span<const double> signal) {
  require_length(signal.size());
  std::vector<Complex> in(signal.begin(), signal.end());
  const std::size_t n = signal.size();
  return Spectrum{n, direct_transform(in, -1.0, n / 2 + 1)};
}

Spectrum forward_fft(std::span<const double> signal) {
  const std::size_t n = signal.size();
  require_length(n);
  if (!is_power_of_two(n)) return naive_dft(signal);
  std::vector<Complex> a(signal.begin(), signal.end());
  radix2_inplace(a, -1.0);
  a.resize(n / 2 + 1);
  // Exact zeros where symmetry demands them.
  a[0].imag(0.0);
  a[n / 2].imag(0.0);
  return Spectrum{n, std::move(a)};
}

Spectrum forward_fft(const NumArray& signal) { return forward_fft(signal.data()); }

void validate_spectrum(const Spectrum& spec) {
  require_length(spec.n);
  if (spec.bins.size() != spec.n / 2 + 1) {
    throw InvalidSpectrumError("spectrum of length " + std::to_string(spec.n) +
                               " needs " + std::to_string(spec.n / 2 + 1) +
                               " bins, got " + std::to_string(spec.bins.size()));
  }
  double scale = 1.0;
  for (const Complex& c : spec.bins) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw InvalidSpectrumError("spectrum contains non-finite bins");
    }
    scale = std::max(scale, std::abs(c));
  }
  const double tol = 1e-9 * scale;
  if (std::abs(spec.bins.front().imag()) > tol) {
    throw InvalidSpectrumError("DC bin must be real");
  }
  if (spec.n % 2 == 0 && std::abs(spec.bins.back().imag()) > tol) {
    throw InvalidSpectrumError("Nyquist bin must be real for even length");
  }
}

std::vector<Complex> full_spectrum(const Spectrum& spec) {
  validate_spectrum(spec);
  const std::size_t n = spec.n;
  std::vector<Complex> full(n);
  for (std::size_t k = 0; k < n; ++k) {
    full[k] = k <= n / 2 ? spec.bins[k] : std::conj(spec.bins[n - k]);
  }
  full[0].imag(0.0);
  if (n % 2 == 0) full[n / 2].imag(0.0);
  return full;
}

std::vector<double> full_amplitude(const Spectrum& spec) {
  const std::size_t n = spec.n;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = std::abs(spec.bins.at(k <= n / 2 ? k : n - k));
  }
  return out;
}

std::vector<Complex> inverse_dft_complex(std::span<const Complex> full) {
  const std::size_t n = full.size();
  require_length(n);
  std::vector<Complex> out;
  if (is_power_of_two(n)) {
    out.assign(full.begin(), full.end());
    radix2_inplace(out, +1.0);
  } else {
    out = direct_transform(full, +1.0, n);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Complex& c : out) c *= inv_n;
  return out;
}

NumArray inverse_fft(const Spectrum& spec) {
  const std::vector<Complex> z = inverse_dft_complex(full_spectrum(spec));
  std::vector<double> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](const Complex& c) { return c.real(); });
  const std::size_t n = out.size();
  return NumArray(Shape{n}, std::move(out));
}

}  // namespace tfc
