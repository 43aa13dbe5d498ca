#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tfc::data {

inline constexpr int kFormatVersion = 1;

struct DatasetMeta {
  std::string name;
  std::size_t num_samples = 0;
  std::size_t channels = 1;  // K
  std::size_t length = 0;    // L
  double sample_rate_hz = 0.0;
  std::optional<std::size_t> num_classes;  // C, or unlabeled
  int format_version = kFormatVersion;
};

// Samples are stored sample-major as [num_samples][channels][length].
struct Dataset {
  DatasetMeta meta;
  std::vector<double> values;
  std::vector<int> labels;  // empty iff meta.num_classes is unset

  std::size_t size() const noexcept { return meta.num_samples; }
  bool labeled() const noexcept { return meta.num_classes.has_value(); }
  std::size_t sample_stride() const noexcept { return meta.channels * meta.length; }
  std::span<const double> sample(std::size_t i) const;
  std::span<const double> channel(std::size_t i, std::size_t c) const;

  // Throws DataError on any broken invariant, naming the first offending
  // sample for non-finite values.
  void validate() const;
};

// Directory layout: meta.json, data.bin (little-endian float32, sample-major)
// and, for labeled data, labels.csv with header "index,label".
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

enum class AlignMode { zero_pad, downsample };
AlignMode parse_align_mode(const std::string& s);

// zero_pad appends zeros (requires L <= target); downsample keeps every
// ceil(L / target)-th point from index 0 and zero-pads any shortfall.
std::vector<double> align_length(std::span<const double> x, std::size_t target, AlignMode mode);
Dataset align_dataset(const Dataset& dataset, std::size_t target, AlignMode mode);

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices,
               const std::string& name);

struct SplitSpec {
  std::vector<std::size_t> finetune;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Draws `per_class` fine-tuning samples from every class, then validation and
// test from the shuffled remainder. Throws DataError when a class is short.
SplitSpec make_split(const Dataset& dataset, std::size_t per_class, std::size_t validation,
                     std::size_t test, std::uint64_t seed);

struct Splits {
  Dataset finetune;
  Dataset validation;
  Dataset test;
};

// Throws DataError if the index lists overlap or fall outside the dataset.
Splits split(const Dataset& dataset, const SplitSpec& spec);

// Desk-scale transfer pair. Pre-training samples sum 1..3 sinusoids with
// frequencies in band A plus Gaussian noise. Fine-tuning samples carry one
// dominant sinusoid whose frequency band (inside the shifted band B) sets the
// class, a weaker distractor anywhere in B, amplitude jitter and noise.
// Frequencies are in cycles per sample window (i.e. FFT bin units).
struct SyntheticConfig {
  std::size_t pretrain_samples = 2000;
  std::size_t finetune_per_class = 30;
  std::size_t validation = 20;
  std::size_t test = 200;
  std::size_t length = 128;
  double sample_rate_hz = 128.0;
  double band_a_lo = 2.0;
  double band_a_hi = 24.0;
  double pretrain_noise = 0.2;
  // Class 0 draws its dominant frequency from [class0_lo, class0_hi], class 1
  // from [class1_lo, class1_hi]; band B spans both.
  double class0_lo = 8.0;
  double class0_hi = 16.5;
  double class1_lo = 19.5;
  double class1_hi = 28.0;
  double amplitude_jitter = 0.3;  // dominant amplitude ~ U(1 - j, 1 + j)
  double distractor_lo = 0.2;
  double distractor_hi = 0.6;
  double finetune_noise = 0.5;

  void validate() const;
  std::size_t finetune_total() const noexcept;
};

struct SyntheticPair {
  Dataset pretrain;  // unlabeled
  Dataset finetune;  // labeled, 2 classes, finetune_total() samples
};

SyntheticPair make_synthetic_pair(const SyntheticConfig& cfg, std::uint64_t seed);

// Splits a synthetic fine-tuning set at the config's sizes.
SplitSpec synthetic_split(const SyntheticConfig& cfg, const Dataset& finetune,
                          std::uint64_t seed);

}  // namespace tfc::data
