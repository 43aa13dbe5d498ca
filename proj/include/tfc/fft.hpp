#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "tfc/tensor.hpp"

namespace tfc {

using Complex = std::complex<double>;

// Half-spectrum of a real signal of length n: bins 0..floor(n/2). The
// remaining bins follow from conjugate symmetry, X[n-k] = conj(X[k]).
//
// Convention: X[k] = sum_t x[t] exp(-2 pi i k t / n) (unnormalised forward);
// the inverse carries the 1/n factor. Amplitudes are |X[k]| on that scale, so a
// unit cosine at an interior bin has amplitude n/2.
struct Spectrum {
  std::size_t n = 0;
  std::vector<Complex> bins;

  std::size_t half() const noexcept { return n / 2; }
  double amplitude(std::size_t k) const { return std::abs(bins.at(k)); }
  double phase(std::size_t k) const { return std::arg(bins.at(k)); }
  std::vector<double> amplitudes() const;
};

bool is_power_of_two(std::size_t n) noexcept;

// Radix-2 path for power-of-two n, direct O(n^2) summation otherwise.
// Throws InvalidLengthError for n < 2.
Spectrum forward_fft(std::span<const double> signal);
Spectrum forward_fft(const NumArray& signal);

// Reference transform by direct summation, any n >= 2.
Spectrum naive_dft(std::span<const double> signal);

// Throws InvalidSpectrumError unless bins.size() == n/2+1, all bins are finite
// and the DC (and Nyquist, for even n) bins are real.
void validate_spectrum(const Spectrum& spec);

NumArray inverse_fft(const Spectrum& spec);

// Conjugate-symmetric expansion to all n bins.
std::vector<Complex> full_spectrum(const Spectrum& spec);

// |X[k]| for k = 0..n-1 in the symmetric layout (same length as the signal).
std::vector<double> full_amplitude(const Spectrum& spec);

// Complex inverse of an arbitrary full spectrum, 1/n scaled. The imaginary
// part of the result measures how far the input is from a real signal.
std::vector<Complex> inverse_dft_complex(std::span<const Complex> full);

}  // namespace tfc
