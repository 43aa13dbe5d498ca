#include "tfc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tfc/checkpoint.hpp"
#include "tfc/errors.hpp"
#include "tfc/parallel.hpp"
#include "tfc/rng.hpp"

namespace tfc::train {

namespace {

// Stream identifiers for SeededRng::derive so that no two consumers share a
// sequence.
constexpr std::uint64_t kInitStream = 0x696e6974;     // "init"
constexpr std::uint64_t kHeadStream = 0x68656164;     // "head"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"
constexpr std::uint64_t kTuneStream = 0x74756e65;     // "tune"
constexpr std::uint64_t kAugSalt = 0x6175676d656e7421ULL;
constexpr std::uint64_t kTuneAugSalt = 0x74756e6561756721ULL;
constexpr std::uint64_t kAnomalyStream = 0x616e6f6d;  // "anom"
constexpr std::size_t kInferenceChunk = 64;

double scalar(const ad::Var& v) { return v ? v->value[0] : 0.0; }

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

nn::ArchConfig arch_for(const data::Dataset& ds, const RunConfig& cfg) {
  nn::ArchConfig arch;
  arch.input_length = ds.meta.length;
  arch.channels = ds.meta.channels;
  arch.residual = cfg.residual;
  arch.branches = cfg.branches;
  return arch;
}

nn::ForwardNeeds needs_for(const loss::LossConfig& lc, bool fused_needed, nn::Branches br) {
  nn::ForwardNeeds needs;
  const bool cons = lc.consistency_active();
  using V = loss::ConsistencyVariant;
  needs.time = lc.use_time_loss || (cons && lc.consistency != V::ff_c);
  needs.freq = lc.use_freq_loss || (cons && lc.consistency != V::tt_c);
  needs.project = cons;
  if (fused_needed) {
    needs.project = true;
    if (br != nn::Branches::freq_only) needs.time = true;
    if (br != nn::Branches::time_only) needs.freq = true;
  }
  return needs;
}

void check_training_data(const data::Dataset& ds) {
  ds.validate();
  if (ds.size() == 0) throw DataError("dataset '" + ds.meta.name + "' is empty");
  if (ds.meta.length < nn::kMinInputLength) {
    throw ShapeError("dataset '" + ds.meta.name + "' has length " +
                     std::to_string(ds.meta.length) + ", below the encoder minimum of " +
                     std::to_string(nn::kMinInputLength));
  }
}

std::vector<int> gather_labels(const data::Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.labels[i]);
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  loss.validate();
  optimizer.validate();
  if (banks.time.empty()) throw ConfigError("augment.time must list at least one policy");
  if (banks.freq.empty()) throw ConfigError("augment.freq must list at least one policy");
  for (const auto& p : banks.freq) p.validate();
  if (finetune.num_classes < 2) throw ConfigError("finetune.num_classes must be >= 2");
  if (!(finetune.joint_loss_weight >= 0.0)) {
    throw ConfigError("finetune.joint_loss_weight must be >= 0");
  }
}

void check_compatible(const nn::TfcModel& model, const data::Dataset& ds) {
  const auto& arch = model.arch();
  if (ds.meta.length != arch.input_length || ds.meta.channels != arch.channels) {
    throw AlignmentError("dataset '" + ds.meta.name + "' is " + std::to_string(ds.meta.channels) +
                         "x" + std::to_string(ds.meta.length) + " but the model expects " +
                         std::to_string(arch.channels) + "x" + std::to_string(arch.input_length) +
                         " (channels x length); align the data with zero_pad/downsample first");
  }
}

nn::TfcModel init_model(const data::Dataset& dataset, const RunConfig& cfg) {
  SeededRng rng = SeededRng::derive(cfg.seed, kInitStream);
  nn::TfcModel model = nn::TfcModel::create(arch_for(dataset, cfg), rng);
  ckpt::round_to_f32(model.params());
  return model;
}

// ---------------------------------------------------------------- pretrain

PretrainResult pretrain(const data::Dataset& ds, const RunConfig& cfg,
                        const ProgressFn& progress) {
  cfg.validate();
  check_training_data(ds);
  if (ds.size() < 2 * cfg.batch_size) {
    throw DataError("pre-training needs at least 2 * batch_size = " +
                    std::to_string(2 * cfg.batch_size) + " samples, dataset '" + ds.meta.name +
                    "' has " + std::to_string(ds.size()));
  }
  for (const auto& p : cfg.banks.time) p.validate(ds.meta.length);

  nn::TfcModel model = init_model(ds, cfg);
  PretrainResult result{model, {}, 0, 0, 0};
  optim::AdamState adam{cfg.optimizer, {}, {}, 0};
  const nn::ForwardNeeds needs = needs_for(cfg.loss, false, cfg.branches);
  std::vector<std::size_t> order = iota_indices(ds.size());
  const std::size_t batches = ds.size() / cfg.batch_size;
  double best_total = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SeededRng shuffle = SeededRng::derive(cfg.seed, kShuffleStream, epoch);
    std::iota(order.begin(), order.end(), 0);
    shuffle.shuffle(order);
    EpochLoss acc{epoch};
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      const nn::ViewBatch views = nn::make_views(ds.values, ds.meta.channels, ds.meta.length, idx,
                                                 cfg.banks, cfg.seed ^ kAugSalt, epoch);
      result.aug_warnings += views.aug_warnings;
      const BatchEmbeddings emb = nn::forward_views(model, views, needs);
      const loss::LossTerms terms = loss::total_pretrain_loss(emb, cfg.loss);
      if (terms.consistency) ++result.consistency_evaluations;
      const double total = scalar(terms.total);
      if (!std::isfinite(total)) {
        throw NumericError("non-finite pre-training loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
      }
      model.params().zero_grads();
      ad::backward(terms.total);
      optim::adam_step(model.params(), adam);
      acc.time += scalar(terms.time);
      acc.freq += scalar(terms.freq);
      acc.consistency += scalar(terms.consistency);
      acc.total += total;
    }
    const double n = static_cast<double>(batches);
    acc.time /= n;
    acc.freq /= n;
    acc.consistency /= n;
    acc.total /= n;
    result.curve.push_back(acc);
    if (progress) progress(acc);
    if (acc.total < best_total) {
      best_total = acc.total;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.model.params().zero_grads();
  ckpt::round_to_f32(result.model.params());
  return result;
}

// --------------------------------------------------------------- inference

namespace {

struct ChunkOutput {
  NumArray z_t, z_f, fused, logits;
};

ChunkOutput run_chunk(nn::TfcModel& model, const data::Dataset& ds,
                      std::span<const std::size_t> idx, bool logits) {
  const nn::ViewBatch views =
      nn::make_plain_views(ds.values, ds.meta.channels, ds.meta.length, idx);
  nn::ForwardNeeds needs{true, true, true};
  const BatchEmbeddings emb = nn::forward_views(model, views, needs);
  ad::Var fused = nn::fuse(model, emb.z_t, emb.z_f, idx.size());
  ChunkOutput out{emb.z_t->value, emb.z_f->value, fused->value, {}};
  if (logits) out.logits = model.forward_classifier(fused)->value;
  return out;
}

std::vector<ChunkOutput> run_chunks(nn::TfcModel& model, const data::Dataset& ds,
                                    std::size_t threads, bool logits) {
  check_compatible(model, ds);
  const std::size_t n = ds.size();
  const std::size_t chunks = (n + kInferenceChunk - 1) / kInferenceChunk;
  const std::vector<std::size_t> all = iota_indices(n);
  std::vector<ChunkOutput> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * kInferenceChunk;
    const std::size_t hi = std::min(n, lo + kInferenceChunk);
    parts[c] = run_chunk(model, ds, std::span(all).subspan(lo, hi - lo), logits);
  });
  return parts;
}

NumArray stack(const std::vector<ChunkOutput>& parts, NumArray ChunkOutput::*field,
               std::size_t cols) {
  std::vector<double> values;
  for (const auto& p : parts) {
    const auto& a = p.*field;
    values.insert(values.end(), a.values().begin(), a.values().end());
  }
  const std::size_t rows = cols ? values.size() / cols : 0;
  return NumArray({rows, cols}, std::move(values));
}

}  // namespace

DatasetEmbeddings embed_dataset(nn::TfcModel& model, const data::Dataset& ds,
                                std::size_t threads) {
  const auto parts = run_chunks(model, ds, threads, false);
  return {stack(parts, &ChunkOutput::z_t, nn::kProjectionDim),
          stack(parts, &ChunkOutput::z_f, nn::kProjectionDim),
          stack(parts, &ChunkOutput::fused, model.arch().fused_dim())};
}

NumArray predict_logits(nn::TfcModel& model, const data::Dataset& ds, std::size_t threads) {
  if (!model.has_classifier()) throw ContractError("model has no classifier head");
  const auto parts = run_chunks(model, ds, threads, true);
  return stack(parts, &ChunkOutput::logits, model.num_classes());
}

std::vector<double> cosine_distances(const DatasetEmbeddings& emb) {
  const std::size_t rows = emb.z_t.dim(0), d = emb.z_t.dim(1);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::span<const double> a(emb.z_t.ptr() + r * d, d);
    const std::span<const double> b(emb.z_f.ptr() + r * d, d);
    out[r] = 1.0 - cosine_similarity(a, b);
  }
  return out;
}

double mean_cosine_distance(const DatasetEmbeddings& emb) {
  const auto d = cosine_distances(emb);
  if (d.empty()) throw ContractError("no embeddings to compare");
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

// ---------------------------------------------------------------- finetune

FinetuneResult finetune(nn::TfcModel model, const data::Dataset& train,
                        const data::Dataset& validation, const data::Dataset* test,
                        const RunConfig& cfg) {
  cfg.validate();
  check_training_data(train);
  check_training_data(validation);
  for (const data::Dataset* ds : {&train, &validation, test}) {
    if (ds == nullptr) continue;
    check_compatible(model, *ds);
    if (!ds->labeled()) throw DataError("dataset '" + ds->meta.name + "' has no labels");
    if (*ds->meta.num_classes != cfg.finetune.num_classes) {
      throw DataError("dataset '" + ds->meta.name + "' has " +
                      std::to_string(*ds->meta.num_classes) + " classes, config says " +
                      std::to_string(cfg.finetune.num_classes));
    }
  }
  for (const auto& p : cfg.banks.time) p.validate(train.meta.length);
  if (model.has_classifier()) {
    if (model.num_classes() != cfg.finetune.num_classes) {
      throw AlignmentError("checkpoint head has " + std::to_string(model.num_classes()) +
                           " classes, config says " + std::to_string(cfg.finetune.num_classes));
    }
  } else {
    SeededRng head_rng = SeededRng::derive(cfg.seed, kHeadStream);
    model.add_classifier(cfg.finetune.num_classes, head_rng);
    ckpt::round_to_f32(model.params());
  }

  auto validate_epoch = [&](nn::TfcModel& m, FinetuneEpoch& e) {
    const NumArray logits = predict_logits(m, validation, cfg.threads);
    e.val_f1 = eval::classification_metrics(logits, validation.labels).f1_macro;
    e.val_loss = scalar(loss::cross_entropy(ad::constant(logits), validation.labels));
  };

  FinetuneResult result{model, {}, 0, std::nullopt};
  FinetuneEpoch best{};
  validate_epoch(model, best);

  optim::AdamState adam{cfg.optimizer, {}, {}, 0};
  const double w = cfg.finetune.joint_loss_weight;
  const nn::ForwardNeeds needs = needs_for(cfg.loss, true, model.arch().branches);
  std::vector<std::size_t> order = iota_indices(train.size());
  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;

  for (std::size_t epoch = 1; epoch <= cfg.finetune.epochs; ++epoch) {
    SeededRng shuffle = SeededRng::derive(cfg.seed, kTuneStream, epoch);
    std::iota(order.begin(), order.end(), 0);
    shuffle.shuffle(order);
    FinetuneEpoch e{epoch};
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      const std::vector<int> labels = gather_labels(train, idx);
      const nn::ViewBatch views = nn::make_views(train.values, train.meta.channels,
                                                 train.meta.length, idx, cfg.banks,
                                                 cfg.seed ^ kTuneAugSalt, epoch);
      const BatchEmbeddings emb = nn::forward_views(model, views, needs);
      ad::Var fused = nn::fuse(model, emb.z_t, emb.z_f, idx.size());
      ad::Var objective = loss::cross_entropy(model.forward_classifier(fused), labels);
      // NT-Xent needs at least two rows; a trailing singleton batch trains the head only.
      if (w > 0.0 && idx.size() * train.meta.channels >= 2) {
        objective = ad::add(objective, ad::scale(loss::total_pretrain_loss(emb, cfg.loss).total, w));
      }
      if (!std::isfinite(scalar(objective))) {
        throw NumericError("non-finite fine-tuning loss at epoch " + std::to_string(epoch));
      }
      model.params().zero_grads();
      ad::backward(objective);
      optim::adam_step(model.params(), adam);
      e.train_loss += scalar(objective) / static_cast<double>(batches);
    }
    nn::TfcModel snapshot = model;
    ckpt::round_to_f32(snapshot.params());
    validate_epoch(snapshot, e);
    result.curve.push_back(e);
    const bool better = result.best_epoch == 0 || e.val_f1 > best.val_f1 ||
                        (e.val_f1 == best.val_f1 && e.val_loss < best.val_loss);
    if (better) {
      best = e;
      result.best_epoch = epoch;
      result.model = std::move(snapshot);
    }
  }
  result.model.params().zero_grads();
  if (test != nullptr) {
    EvalOptions opts;
    opts.threads = cfg.threads;
    opts.seed = cfg.seed;
    result.test_report = evaluate(result.model, *test, EvalTasks{}, opts);
  }
  return result;
}

// ---------------------------------------------------------------- evaluate

namespace {

struct AnomalySplit {
  std::vector<std::size_t> train, val, test;
};

// Half the normals fit the detector. The remaining normals and the outliers
// (capped at one outlier per nine normals) are split evenly into a threshold
// selection part and a reporting part.
AnomalySplit anomaly_split(const data::Dataset& ds, int normal_class, std::uint64_t seed) {
  std::vector<std::size_t> normals, outliers;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (ds.labels[i] == normal_class ? normals : outliers).push_back(i);
  }
  SeededRng rng = SeededRng::derive(seed, kAnomalyStream);
  rng.shuffle(normals);
  rng.shuffle(outliers);
  AnomalySplit s;
  const std::size_t n_train = normals.size() / 2;
  s.train.assign(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::size_t held = normals.size() - n_train;
  const std::size_t cap = (held + 8) / 9;
  outliers.resize(std::min(outliers.size(), cap));
  for (std::size_t i = n_train; i < normals.size(); ++i) {
    ((i - n_train) % 2 == 0 ? s.val : s.test).push_back(normals[i]);
  }
  for (std::size_t i = 0; i < outliers.size(); ++i) {
    (i % 2 == 0 ? s.val : s.test).push_back(outliers[i]);
  }
  if (s.train.size() < 10) {
    throw DegenerateInputError("anomaly detection needs >= 20 samples of the normal class, got " +
                               std::to_string(normals.size()));
  }
  if (outliers.size() < 2) {
    throw DegenerateInputError("anomaly detection needs at least 2 outlier samples");
  }
  return s;
}

NumArray rows_of(const NumArray& m, std::span<const std::size_t> idx) {
  const std::size_t d = m.dim(1);
  std::vector<double> out;
  out.reserve(idx.size() * d);
  for (auto i : idx) out.insert(out.end(), m.ptr() + i * d, m.ptr() + (i + 1) * d);
  return NumArray({idx.size(), d}, std::move(out));
}

}  // namespace

eval::MetricsReport evaluate(nn::TfcModel& model, const data::Dataset& ds, const EvalTasks& tasks,
                             const EvalOptions& options) {
  check_compatible(model, ds);
  ds.validate();
  if (!ds.labeled()) throw DataError("evaluation needs a labeled dataset");
  const std::size_t classes = *ds.meta.num_classes;
  eval::MetricsReport report;
  if (tasks.classify) {
    if (!model.has_classifier()) {
      throw ContractError("classification needs a fine-tuned checkpoint with a classifier head");
    }
    if (model.num_classes() != classes) {
      throw AlignmentError("classifier has " + std::to_string(model.num_classes()) +
                           " classes, dataset has " + std::to_string(classes));
    }
    report.classification =
        eval::classification_metrics(predict_logits(model, ds, options.threads), ds.labels);
  }
  if (!tasks.cluster && !tasks.anomaly) return report;

  const DatasetEmbeddings emb = embed_dataset(model, ds, options.threads);
  if (tasks.cluster) {
    eval::KMeansOptions km;
    km.threads = options.threads;
    const eval::KMeansResult res = eval::kmeans(emb.fused, classes, options.seed, km);
    report.clustering = eval::clustering_metrics(res.assignments, ds.labels, emb.fused);
    report.notes["clustering.k"] = std::to_string(classes);
  }
  if (tasks.anomaly) {
    const AnomalySplit split = anomaly_split(ds, options.normal_class, options.seed);
    eval::AnomalyConfig acfg = options.anomaly;
    acfg.seed = options.seed;
    const NumArray fit = rows_of(emb.fused, split.train);
    auto outlier_flags = [&](const std::vector<std::size_t>& idx) {
      std::vector<int> f;
      for (auto i : idx) f.push_back(ds.labels[i] != options.normal_class ? 1 : 0);
      return f;
    };
    const auto val_scores = eval::anomaly_scores(fit, rows_of(emb.fused, split.val), acfg);
    const double threshold = eval::best_f1_threshold(val_scores, outlier_flags(split.val));
    const auto test_scores = eval::anomaly_scores(fit, rows_of(emb.fused, split.test), acfg);
    eval::AnomalyMetrics am = eval::anomaly_metrics(test_scores, outlier_flags(split.test), threshold);
    am.detector = eval::to_string(acfg.detector);
    report.anomaly = am;
    report.notes["anomaly.normal_class"] = std::to_string(options.normal_class);
    report.notes["anomaly.nu"] = std::to_string(acfg.nu);
    if (acfg.detector == eval::Detector::ocsvm) {
      report.notes["anomaly.kernel"] = "rbf via " + std::to_string(acfg.features) +
                                       " random Fourier features, median-heuristic bandwidth";
    } else {
      report.notes["anomaly.fallback"] = "mahalanobis distance to the normal centroid";
    }
    report.notes["anomaly.split"] = std::to_string(split.train.size()) + "/" +
                                    std::to_string(split.val.size()) + "/" +
                                    std::to_string(split.test.size());
  }
  return report;
}

}  // namespace tfc::train
