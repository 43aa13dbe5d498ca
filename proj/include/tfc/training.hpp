#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tfc/datasets.hpp"
#include "tfc/evaluation.hpp"
#include "tfc/losses.hpp"
#include "tfc/model.hpp"
#include "tfc/optimizer.hpp"

namespace tfc::train {

struct FinetuneConfig {
  bool enabled = true;
  std::size_t epochs = 40;
  std::size_t num_classes = 2;
  // Weight of the contrastive objective next to cross-entropy.
  double joint_loss_weight = 1.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t epochs = 40;
  loss::LossConfig loss;
  optim::AdamConfig optimizer;
  bool residual = true;
  nn::Branches branches = nn::Branches::both;
  nn::AugmentationBanks banks;
  FinetuneConfig finetune;
  // Worker cap for inference and k-means; never changes results.
  std::size_t threads = 1;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double time = 0.0;
  double freq = 0.0;
  double consistency = 0.0;
  double total = 0.0;
};

using ProgressFn = std::function<void(const EpochLoss&)>;

struct PretrainResult {
  nn::TfcModel model;  // parameters of the lowest-loss epoch, rounded to f32
  std::vector<EpochLoss> curve;
  std::size_t best_epoch = 0;
  // Number of batches on which the consistency term was computed.
  std::size_t consistency_evaluations = 0;
  std::size_t aug_warnings = 0;
};

// Label-free pre-training. Each epoch shuffles with a seeded stream, drops the
// last partial batch, augments each sample from its own (seed, epoch, index)
// stream and takes one Adam step per batch.
PretrainResult pretrain(const data::Dataset& dataset, const RunConfig& cfg,
                        const ProgressFn& progress = {});

// Fresh, untrained model for the dataset's geometry.
nn::TfcModel init_model(const data::Dataset& dataset, const RunConfig& cfg);

struct FinetuneEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double val_loss = 0.0;
};

struct FinetuneResult {
  nn::TfcModel model;  // best validation epoch, rounded to f32
  std::vector<FinetuneEpoch> curve;
  std::size_t best_epoch = 0;  // 0 when no training happened
  std::optional<eval::MetricsReport> test_report;
};

// Full fine-tuning of every network plus a fresh classifier head with
// cross-entropy + joint_loss_weight * contrastive loss. Picks the epoch with
// the highest validation macro-F1 (lower validation cross-entropy breaks
// ties). Throws AlignmentError if the data does not match the model.
FinetuneResult finetune(nn::TfcModel model, const data::Dataset& train,
                        const data::Dataset& validation, const data::Dataset* test,
                        const RunConfig& cfg);

// Un-augmented embeddings of every sample. z_t/z_f are [N*K, 128]
// (sample-major), fused is [N, fused_dim]. Inference runs in fixed chunks so
// the thread count never changes the values.
struct DatasetEmbeddings {
  NumArray z_t, z_f, fused;
};
DatasetEmbeddings embed_dataset(nn::TfcModel& model, const data::Dataset& dataset,
                                std::size_t threads);

NumArray predict_logits(nn::TfcModel& model, const data::Dataset& dataset, std::size_t threads);

// 1 - cos(z_t, z_f) per row.
std::vector<double> cosine_distances(const DatasetEmbeddings& emb);
double mean_cosine_distance(const DatasetEmbeddings& emb);

struct EvalTasks {
  bool classify = true;
  bool cluster = false;
  bool anomaly = false;
};

struct EvalOptions {
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  eval::AnomalyConfig anomaly;
  int normal_class = 0;
};

// Runs the requested task heads on frozen embeddings of a labeled dataset.
eval::MetricsReport evaluate(nn::TfcModel& model, const data::Dataset& dataset,
                             const EvalTasks& tasks, const EvalOptions& options);

// Throws AlignmentError if the dataset geometry differs from the model's.
void check_compatible(const nn::TfcModel& model, const data::Dataset& dataset);

}  // namespace tfc::train
