#include "tfc/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "tfc/errors.hpp"

namespace tfc::aug {

void TimeAugPolicy::validate(std::size_t length) const {
  if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be >= 0");
  if (!(scale_lo > 0.0) || !(scale_lo <= scale_hi)) {
    throw ConfigError("scale range must satisfy 0 < lo <= hi");
  }
  if (max_shift >= length) {
    throw ConfigError("max_shift " + std::to_string(max_shift) +
                      " must be below the signal length " + std::to_string(length));
  }
  if (!(segment_ratio > 0.0 && segment_ratio <= 1.0)) {
    throw ConfigError("segment_ratio must lie in (0, 1]");
  }
}

void FreqAugPolicy::validate() const {
  if (budget < 1) throw ConfigError("frequency budget E must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
}

std::string to_string(TimeAugKind kind) {
  switch (kind) {
    case TimeAugKind::jitter: return "jitter";
    case TimeAugKind::scaling: return "scaling";
    case TimeAugKind::time_shift: return "time_shift";
    case TimeAugKind::neighborhood: return "neighborhood";
  }
  return "?";
}

std::string to_string(FreqAugMode mode) {
  return mode == FreqAugMode::remove ? "remove" : "add";
}

std::string to_string(Band band) {
  switch (band) {
    case Band::full: return "full";
    case Band::low: return "low";
    case Band::high: return "high";
  }
  return "?";
}

std::string to_string(Selection selection) {
  return selection == Selection::uniform_random ? "uniform_random" : "gaussian";
}

TimeAugKind parse_time_kind(const std::string& s) {
  for (auto k : {TimeAugKind::jitter, TimeAugKind::scaling, TimeAugKind::time_shift,
                 TimeAugKind::neighborhood}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown time augmentation kind '" + s +
                    "' (expected jitter, scaling, time_shift, neighborhood)");
}

FreqAugMode parse_freq_mode(const std::string& s) {
  if (s == "remove") return FreqAugMode::remove;
  if (s == "add") return FreqAugMode::add;
  throw ConfigError("unknown frequency mode '" + s + "' (expected remove, add)");
}

Band parse_band(const std::string& s) {
  for (auto b : {Band::full, Band::low, Band::high}) {
    if (to_string(b) == s) return b;
  }
  throw ConfigError("unknown band '" + s + "' (expected full, low, high)");
}

Selection parse_selection(const std::string& s) {
  if (s == "uniform_random") return Selection::uniform_random;
  if (s == "gaussian") return Selection::gaussian;
  throw ConfigError("unknown selection '" + s + "' (expected uniform_random, gaussian)");
}

// --------------------------------------------------------------------- time

std::vector<double> jitter(std::span<const double> x, double sigma, SeededRng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  for (double& v : out) v += rng.normal(0.0, sigma);
  return out;
}

std::vector<double> scale(std::span<const double> x, double factor) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v *= factor;
  return out;
}

std::vector<double> circular_shift(std::span<const double> x, std::ptrdiff_t shift) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size());
  if (n == 0) return out;
  const std::ptrdiff_t s = ((shift % n) + n) % n;
  for (std::ptrdiff_t t = 0; t < n; ++t) out[static_cast<std::size_t>((t + s) % n)] = x[t];
  return out;
}

std::vector<double> keep_window(std::span<const double> x, std::size_t start,
                                std::size_t width) {
  std::vector<double> out(x.size(), 0.0);
  const std::size_t end = std::min(x.size(), start + width);
  for (std::size_t t = start; t < end; ++t) out[t] = x[t];
  return out;
}

std::vector<double> augment_time(std::span<const double> x, const TimeAugPolicy& policy,
                                 SeededRng& rng) {
  if (x.size() < 4) {
    throw ShapeError("augment_time needs length >= 4, got " + std::to_string(x.size()));
  }
  policy.validate(x.size());
  switch (policy.kind) {
    case TimeAugKind::jitter:
      return jitter(x, policy.jitter_sigma, rng);
    case TimeAugKind::scaling:
      return scale(x, rng.uniform(policy.scale_lo, policy.scale_hi));
    case TimeAugKind::time_shift: {
      const auto bound = static_cast<std::int64_t>(policy.max_shift);
      return circular_shift(x, static_cast<std::ptrdiff_t>(rng.uniform_int(-bound, bound)));
    }
    case TimeAugKind::neighborhood: {
      const auto width = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::lround(policy.segment_ratio *
                                               static_cast<double>(x.size()))),
          1, x.size());
      const std::size_t start = static_cast<std::size_t>(rng.below(x.size() - width + 1));
      return keep_window(x, start, width);
    }
  }
  throw ConfigError("unhandled time augmentation kind");
}

// ---------------------------------------------------------------- frequency

std::pair<std::size_t, std::size_t> band_range(std::size_t n, Band band) {
  const std::size_t half = n / 2;
  const std::size_t split = half / 2;
  switch (band) {
    case Band::full: return {1, half};
    case Band::low: return {1, split};
    case Band::high: return {split + 1, half};
  }
  return {1, half};
}

namespace {

// Draws up to `count` distinct entries of `candidates` (sorted bin indices).
std::vector<std::size_t> select_bins(std::vector<std::size_t> candidates, std::size_t count,
                                     Selection selection, std::size_t band_lo,
                                     std::size_t band_hi, SeededRng& rng) {
  count = std::min(count, candidates.size());
  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  if (selection == Selection::gaussian && count > 0) {
    const double center = 0.5 * static_cast<double>(band_lo + band_hi);
    const double sigma = static_cast<double>(band_hi - band_lo + 1) / 4.0;
    const std::size_t max_attempts = 100 * count;
    for (std::size_t attempt = 0; attempt < max_attempts && chosen.size() < count; ++attempt) {
      const double draw = std::round(rng.normal(center, sigma));
      const auto bin = static_cast<std::size_t>(
          std::clamp(draw, static_cast<double>(band_lo), static_cast<double>(band_hi)));
      const auto it = std::lower_bound(candidates.begin(), candidates.end(), bin);
      if (it == candidates.end() || *it != bin) continue;
      chosen.push_back(bin);
      candidates.erase(it);
    }
  }
  // Partial Fisher-Yates for uniform selection and for any Gaussian shortfall.
  for (std::size_t i = 0; chosen.size() < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    chosen.push_back(candidates[i]);
  }
  return chosen;
}

}  // namespace

FreqAugResult augment_freq(const Spectrum& spec, const FreqAugPolicy& policy,
                           SeededRng& rng) {
  policy.validate();
  validate_spectrum(spec);
  FreqAugResult result{spec, {}, std::nullopt};
  const auto [lo, hi] = band_range(spec.n, policy.band);
  if (lo > hi) {
    result.warning = "band '" + to_string(policy.band) + "' is empty for length " +
                     std::to_string(spec.n);
    return result;
  }

  if (policy.mode == FreqAugMode::remove) {
    std::vector<std::size_t> candidates;
    for (std::size_t k = lo; k <= hi; ++k) candidates.push_back(k);
    if (candidates.size() < policy.budget) {
      result.warning = "only " + std::to_string(candidates.size()) +
                       " bins available for removal, budget " +
                       std::to_string(policy.budget);
    }
    result.changed_bins =
        select_bins(std::move(candidates), policy.budget, policy.selection, lo, hi, rng);
    for (std::size_t k : result.changed_bins) result.spectrum.bins[k] = Complex(0.0, 0.0);
    return result;
  }

  double peak = 0.0;
  for (std::size_t k = 1; k <= spec.half(); ++k) peak = std::max(peak, std::abs(spec.bins[k]));
  if (peak == 0.0) {
    result.warning = "spectrum has no non-DC energy; add-mode skipped";
    return result;
  }
  const double target = policy.alpha * peak;
  std::vector<std::size_t> eligible;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (std::abs(spec.bins[k]) < target) eligible.push_back(k);
  }
  if (eligible.size() < policy.budget) {
    result.warning = "only " + std::to_string(eligible.size()) +
                     " bins below alpha*A_m, budget " + std::to_string(policy.budget);
  }
  result.changed_bins =
      select_bins(std::move(eligible), policy.budget, policy.selection, lo, hi, rng);
  for (std::size_t k : result.changed_bins) {
    Complex& c = result.spectrum.bins[k];
    const double amp = std::abs(c);
    c = amp > 0.0 ? c * (target / amp) : Complex(target, 0.0);
  }
  return result;
}

std::vector<NamedFreqPolicy> enumerate_policies() {
  std::vector<NamedFreqPolicy> out;
  for (Band band : {Band::low, Band::high}) {
    for (std::size_t budget : {std::size_t{1}, std::size_t{5}}) {
      for (Selection sel : {Selection::uniform_random, Selection::gaussian}) {
        FreqAugPolicy p;
        p.mode = FreqAugMode::add;
        p.budget = budget;
        p.alpha = 0.5;
        p.band = band;
        p.selection = sel;
        std::string name = to_string(band) + (budget == 1 ? "-single-" : "-multi-") +
                           (sel == Selection::gaussian ? "gaussian" : "uniform");
        out.push_back({std::move(name), p});
      }
    }
  }
  return out;
}

std::vector<FreqAugPolicy> default_freq_bank() {
  FreqAugPolicy remove;
  remove.mode = FreqAugMode::remove;
  FreqAugPolicy add;
  add.mode = FreqAugMode::add;
  return {remove, add};
}

std::vector<TimeAugPolicy> default_time_bank() {
  std::vector<TimeAugPolicy> bank;
  for (auto kind : {TimeAugKind::jitter, TimeAugKind::scaling, TimeAugKind::time_shift,
                    TimeAugKind::neighborhood}) {
    TimeAugPolicy p;
    p.kind = kind;
    bank.push_back(p);
  }
  return bank;
}

}  // namespace tfc::aug
