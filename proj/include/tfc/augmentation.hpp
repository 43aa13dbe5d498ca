#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tfc/fft.hpp"
#include "tfc/rng.hpp"
#include "tfc/tensor.hpp"

namespace tfc::aug {

enum class TimeAugKind { jitter, scaling, time_shift, neighborhood };

struct TimeAugPolicy {
  TimeAugKind kind = TimeAugKind::jitter;
  double jitter_sigma = 0.2;
  double scale_lo = 0.7;
  double scale_hi = 1.3;
  std::size_t max_shift = 16;
  double segment_ratio = 0.75;

  // Throws ConfigError. Needs the signal length for the shift bound.
  void validate(std::size_t length) const;
};

enum class FreqAugMode { remove, add };
enum class Band { full, low, high };
enum class Selection { uniform_random, gaussian };

struct FreqAugPolicy {
  FreqAugMode mode = FreqAugMode::remove;
  std::size_t budget = 1;  // E
  double alpha = 0.5;
  Band band = Band::full;
  Selection selection = Selection::uniform_random;

  void validate() const;
};

std::string to_string(TimeAugKind kind);
std::string to_string(FreqAugMode mode);
std::string to_string(Band band);
std::string to_string(Selection selection);
TimeAugKind parse_time_kind(const std::string& s);
FreqAugMode parse_freq_mode(const std::string& s);
Band parse_band(const std::string& s);
Selection parse_selection(const std::string& s);

// Deterministic primitives behind augment_time.
std::vector<double> jitter(std::span<const double> x, double sigma, SeededRng& rng);
std::vector<double> scale(std::span<const double> x, double factor);
// out[t] = x[(t - shift) mod n]; a positive shift moves samples later.
std::vector<double> circular_shift(std::span<const double> x, std::ptrdiff_t shift);
// Keeps [start, start + width) and zeroes everything else.
std::vector<double> keep_window(std::span<const double> x, std::size_t start,
                                std::size_t width);

// Output length always equals input length; input length must be >= 4.
std::vector<double> augment_time(std::span<const double> x, const TimeAugPolicy& policy,
                                 SeededRng& rng);

// Inclusive half-spectrum bin range a band covers. DC is never included:
// low = 1..floor(half/2), high = floor(half/2)+1..half, full = 1..half.
std::pair<std::size_t, std::size_t> band_range(std::size_t n, Band band);

struct FreqAugResult {
  Spectrum spectrum;
  std::vector<std::size_t> changed_bins;  // in selection order
  std::optional<std::string> warning;
};

// Removes or adds E frequency components. Remove zeroes the chosen bins.
// Add raises chosen bins whose amplitude is below alpha * A_m to exactly
// alpha * A_m (A_m = max amplitude over bins 1..half), keeping phase, or phase
// 0 for empty bins. Bins are drawn without replacement. Shortfalls are
// reported through `warning`, never thrown.
FreqAugResult augment_freq(const Spectrum& spec, const FreqAugPolicy& policy,
                           SeededRng& rng);

struct NamedFreqPolicy {
  std::string name;
  FreqAugPolicy policy;
};

// {low, high} x {single (E=1), multi (E=5)} x {uniform, gaussian}, all in
// add mode with alpha = 0.5. Names look like "low-single-uniform".
std::vector<NamedFreqPolicy> enumerate_policies();

// Remove/add with the training defaults E = 1, alpha = 0.5, full band.
std::vector<FreqAugPolicy> default_freq_bank();
std::vector<TimeAugPolicy> default_time_bank();

}  // namespace tfc::aug
