#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfc/augmentation.hpp"
#include "tfc/autodiff.hpp"
#include "tfc/embeddings.hpp"
#include "tfc/rng.hpp"

namespace tfc::nn {

// Fixed layer geometry of each encoder (time and frequency share it):
// three conv blocks with kernel 8, strides 8/1/1, depths 32/64/128, padding 4,
// ReLU, then max-pool (2, 2). Projectors are dense 256 -> ReLU -> dense 128.
// The classifier head is dense 64 -> ReLU -> dense C.
inline constexpr std::size_t kKernel = 8;
inline constexpr std::size_t kPadding = 4;
inline constexpr std::size_t kStrides[3] = {8, 1, 1};
inline constexpr std::size_t kDepths[3] = {32, 64, 128};
inline constexpr std::size_t kPool = 2;
inline constexpr std::size_t kProjectorHidden = 256;
inline constexpr std::size_t kProjectionDim = 128;
inline constexpr std::size_t kHeadHidden = 64;
inline constexpr std::size_t kMinInputLength = 64;

enum class Branches { both, time_only, freq_only };
std::string to_string(Branches b);
Branches parse_branches(const std::string& s);

struct ArchConfig {
  std::size_t input_length = 128;
  std::size_t channels = 1;
  // Adds a strided 1x1 projection skip around conv blocks 2 and 3.
  bool residual = true;
  // Which projections form the fused fine-tuning embedding.
  Branches branches = Branches::both;

  std::size_t fused_dim() const noexcept;
};

// Length of the final pooled feature map for a given input length.
std::size_t encoder_output_length(std::size_t input_length);
std::size_t encoder_flat_dim(std::size_t input_length);

struct EncoderPass {
  ad::Var h;
  ad::Var z;  // null when the projector was not requested
};

struct Embedding {
  NumArray h;
  NumArray z;
};

struct AugmentationBanks {
  std::vector<aug::TimeAugPolicy> time = aug::default_time_bank();
  std::vector<aug::FreqAugPolicy> freq = aug::default_freq_bank();
};

// Amplitudes of the full symmetric spectrum, same length as the signal.
std::vector<double> amplitude_input(std::span<const double> signal);

// G_T, G_F, R_T, R_F and an optional classifier head over one shared
// ParamStore. Channels of a multichannel sample all go through the same
// single-channel networks.
class TfcModel {
 public:
  static TfcModel create(const ArchConfig& arch, SeededRng& rng);

  void add_classifier(std::size_t num_classes, SeededRng& rng);
  bool has_classifier() const noexcept { return num_classes_ > 0; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  const ArchConfig& arch() const noexcept { return arch_; }
  ad::ParamStore& params() noexcept { return store_; }
  const ad::ParamStore& params() const noexcept { return store_; }

  // x: [rows, L, 1] raw signals / full amplitude spectra.
  EncoderPass forward_time(const ad::Var& x, bool project);
  EncoderPass forward_freq(const ad::Var& amplitudes, bool project);
  // fused: [B, fused_dim] -> logits [B, C]
  ad::Var forward_classifier(const ad::Var& fused);

  Embedding encode_time(std::span<const double> signal);
  Embedding encode_freq(std::span<const double> amplitudes);
  NumArray classify(const NumArray& fused);

 private:
  TfcModel(ArchConfig arch, ad::ParamStore store, std::size_t num_classes)
      : arch_(arch), store_(std::move(store)), num_classes_(num_classes) {}
  friend TfcModel restore_model(const ArchConfig&, std::size_t, ad::ParamStore);

  EncoderPass forward_branch(const std::string& encoder, const std::string& projector,
                             const ad::Var& x, bool project);
  void check_input(const NumArray& x) const;

  ArchConfig arch_;
  ad::ParamStore store_;
  std::size_t num_classes_ = 0;
};

// Rebuilds a model around previously saved parameters; validates that every
// expected name is present with the expected shape.
TfcModel restore_model(const ArchConfig& arch, std::size_t num_classes,
                       ad::ParamStore store);

// One batch of contrastive views. Each array is [rows, L, 1] with
// rows = samples * channels, ordered sample-major.
struct ViewBatch {
  NumArray time, time_aug, freq, freq_aug;
  std::size_t samples = 0;
  std::size_t aug_warnings = 0;  // frequency augmentations that fell short of E
};

// `data` is [N][K][L] flattened. Sample i's augmentations are drawn from
// SeededRng::derive(seed, epoch, indices[i]) so results do not depend on batch
// composition.
ViewBatch make_views(std::span<const double> data, std::size_t channels, std::size_t length,
                     std::span<const std::size_t> indices, const AugmentationBanks& banks,
                     std::uint64_t seed, std::uint64_t epoch);

// Raw and amplitude views only, without augmentation.
ViewBatch make_plain_views(std::span<const double> data, std::size_t channels,
                           std::size_t length, std::span<const std::size_t> indices);

struct ForwardNeeds {
  bool time = true;
  bool freq = true;
  bool project = true;
};

BatchEmbeddings forward_views(TfcModel& model, const ViewBatch& views,
                              const ForwardNeeds& needs);

// [rows, 128] projections -> [samples, fused_dim] per the arch's branches.
// Each sample's block is [z_t(ch0); z_f(ch0); z_t(ch1); ...].
ad::Var fuse(const TfcModel& model, const ad::Var& z_t, const ad::Var& z_f,
             std::size_t samples);

struct EmbeddingQuad {
  NumArray h_t, h_t_aug, h_f, h_f_aug;
  NumArray z_t, z_t_aug, z_f, z_f_aug;
};

struct SampleEmbedding {
  std::vector<EmbeddingQuad> channels;
  NumArray fused;
};

// sample is [K][L] flattened with K = arch.channels.
SampleEmbedding embed_sample(TfcModel& model, std::span<const double> sample,
                             const AugmentationBanks& banks, SeededRng& rng);

}  // namespace tfc::nn
