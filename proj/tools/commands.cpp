#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tfc/augmentation.hpp"
#include "tfc/checkpoint.hpp"
#include "tfc/config.hpp"
#include "tfc/errors.hpp"
#include "tfc/fft.hpp"
#include "tfc/parallel.hpp"
#include "tfc/training.hpp"

namespace tfc::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kPretrainedName = "pretrained";
constexpr const char* kFinetunedName = "finetuned";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed while writing " + path.string());
}

std::string pretty(const ojson& j) { return j.dump(2) + "\n"; }

// Accepts "<dir>/pretrained", or either file of the pair.
fs::path checkpoint_prefix(const std::string& arg) {
  for (const std::string suffix : {".manifest.json", ".params.bin"}) {
    if (arg.size() > suffix.size() && arg.ends_with(suffix)) {
      return arg.substr(0, arg.size() - suffix.size());
    }
  }
  return arg;
}

cfg::CliConfig load_cfg(const std::string& path, std::size_t threads) {
  cfg::CliConfig c = path.empty() ? cfg::parse_config(nlohmann::json::object())
                                  : cfg::load_config(path);
  cfg::apply_env_overrides(c);
  c.run.threads = threads == 0 ? default_threads() : threads;
  return c;
}

data::Dataset load_aligned(const fs::path& dir, const cfg::AlignConfig& align,
                           const std::string& key) {
  if (dir.empty()) throw ConfigError(key + ": dataset path not set");
  if (!fs::exists(dir)) throw DataError(key + ": dataset directory " + dir.string() + " not found");
  data::Dataset ds = data::load_dataset(dir);
  if (align.length && *align.length != ds.meta.length) {
    ds = data::align_dataset(ds, *align.length, align.mode);
  }
  return ds;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ojson provenance(const std::string& command, const cfg::CliConfig& c) {
  return {{"command", command}, {"seed", c.run.seed}, {"config", cfg::to_json(c)}};
}

void write_metrics(const fs::path& dir, const eval::MetricsReport& report) {
  write_file(dir / "metrics.json", pretty(eval::to_json(report)));
  write_file(dir / "metrics.csv", eval::to_csv(report));
}

// ------------------------------------------------------------------ commands

struct Options {
  std::string config;
  std::string out;
  std::string checkpoint;
  std::string dataset;
  std::string tasks = "classify";
  std::string policy;
  std::size_t count = 4;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool random_init = false;
};

int pretrain(const Options& o, std::ostream& out) {
  const cfg::CliConfig c = load_cfg(o.config, o.threads);
  const data::Dataset ds = load_aligned(c.data.pretrain, c.align, "data.pretrain");
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const std::string started = utc_now();

  const train::PretrainResult res = train::pretrain(ds, c.run, [&](const train::EpochLoss& e) {
    out << "epoch=" << e.epoch << " total=" << num(e.total) << std::endl;
  });

  std::string curve = "epoch,loss_t,loss_f,loss_c,total\n";
  for (const auto& e : res.curve) {
    curve += std::to_string(e.epoch) + "," + num(e.time) + "," + num(e.freq) + "," +
             num(e.consistency) + "," + num(e.total) + "\n";
  }
  write_file(dir / "loss_curve.csv", curve);

  ojson run = provenance("pretrain", c);
  run["best_epoch"] = res.best_epoch;
  const std::string sha = ckpt::save(res.model, dir / kPretrainedName, run);

  ojson record = {{"command", "pretrain"},
                  {"started_at", started},
                  {"finished_at", utc_now()},
                  {"seed", c.run.seed},
                  {"dataset", ds.meta.name},
                  {"checkpoint", {{"prefix", kPretrainedName}, {"blob_sha1", sha}}},
                  {"best_epoch", res.best_epoch},
                  {"consistency_evaluations", res.consistency_evaluations},
                  {"augmentation_warnings", res.aug_warnings},
                  {"config", cfg::to_json(c)}};
  write_file(dir / "run.json", pretty(record));
  return kOk;
}

int finetune(const Options& o, std::ostream& out) {
  const cfg::CliConfig c = load_cfg(o.config, o.threads);
  const data::Dataset tr = load_aligned(c.data.finetune_train, c.align, "data.finetune_train");
  const data::Dataset va = load_aligned(c.data.finetune_val, c.align, "data.finetune_val");
  std::optional<data::Dataset> te;
  if (!c.data.finetune_test.empty()) {
    te = load_aligned(c.data.finetune_test, c.align, "data.finetune_test");
  }
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const std::string started = utc_now();

  std::string source = "random_init";
  std::string source_sha;
  nn::TfcModel model = [&] {
    if (o.random_init) return train::init_model(tr, c.run);
    ckpt::Loaded loaded = ckpt::load(checkpoint_prefix(o.checkpoint));
    source = checkpoint_prefix(o.checkpoint).filename().string();
    source_sha = loaded.blob_sha1;
    return std::move(loaded.model);
  }();

  const train::FinetuneResult res =
      train::finetune(std::move(model), tr, va, te ? &*te : nullptr, c.run);
  std::string curve = "epoch,train_loss,val_f1,val_loss\n";
  for (const auto& e : res.curve) {
    out << "epoch=" << e.epoch << " total=" << num(e.train_loss) << " val_f1=" << num(e.val_f1)
        << std::endl;
    curve += std::to_string(e.epoch) + "," + num(e.train_loss) + "," + num(e.val_f1) + "," +
             num(e.val_loss) + "\n";
  }
  write_file(dir / "finetune_curve.csv", curve);

  ojson run = provenance("finetune", c);
  run["source"] = source;
  run["source_blob_sha1"] = source_sha;
  run["best_epoch"] = res.best_epoch;
  const std::string sha = ckpt::save(res.model, dir / kFinetunedName, run);
  if (res.test_report) write_metrics(dir, *res.test_report);

  ojson record = {{"command", "finetune"},
                  {"started_at", started},
                  {"finished_at", utc_now()},
                  {"seed", c.run.seed},
                  {"source", source},
                  {"source_blob_sha1", source_sha},
                  {"checkpoint", {{"prefix", kFinetunedName}, {"blob_sha1", sha}}},
                  {"best_epoch", res.best_epoch},
                  {"config", cfg::to_json(c)}};
  write_file(dir / "run.json", pretty(record));
  return kOk;
}

int evaluate(const Options& o, std::ostream&) {
  const cfg::CliConfig c = load_cfg(o.config, o.threads);
  train::EvalTasks tasks{false, false, false};
  for (const std::string& t : split_list(o.tasks)) {
    if (t == "classify") tasks.classify = true;
    else if (t == "cluster") tasks.cluster = true;
    else if (t == "anomaly") tasks.anomaly = true;
    else throw ConfigError("--tasks: unknown task '" + t + "' (valid: classify, cluster, anomaly)");
  }
  if (!tasks.classify && !tasks.cluster && !tasks.anomaly) {
    throw ConfigError("--tasks: no task selected");
  }
  ckpt::Loaded loaded = ckpt::load(checkpoint_prefix(o.checkpoint));
  if (tasks.classify && !loaded.model.has_classifier()) {
    throw ConfigError("--tasks classify needs a fine-tuned checkpoint with a classifier head");
  }
  const data::Dataset ds = load_aligned(o.dataset, c.align, "--dataset");
  train::EvalOptions opts{c.run.threads, c.run.seed, c.anomaly, c.normal_class};
  opts.anomaly.seed = c.run.seed;
  const eval::MetricsReport report = train::evaluate(loaded.model, ds, tasks, opts);
  write_metrics(o.out.empty() ? fs::path(".") : fs::path(o.out), report);
  return kOk;
}

std::string all_policy_names() {
  std::string names = "jitter, scaling, time_shift, neighborhood, " + cfg::freq_policy_names();
  return names;
}

int augment_preview(const Options& o, std::ostream& out) {
  const cfg::CliConfig c = load_cfg(o.config, o.threads);
  std::optional<aug::TimeAugPolicy> time_policy;
  std::optional<aug::FreqAugPolicy> freq_policy;
  for (const auto& p : c.run.banks.time) {
    if (aug::to_string(p.kind) == o.policy && !time_policy) time_policy = p;
  }
  for (const auto& p : aug::default_time_bank()) {
    if (aug::to_string(p.kind) == o.policy && !time_policy) time_policy = p;
  }
  if (!time_policy) {
    try {
      freq_policy = cfg::named_freq_policy(o.policy);
    } catch (const ConfigError&) {
      throw ConfigError("--policy: unknown policy '" + o.policy +
                        "'; valid names: " + all_policy_names());
    }
  }

  const data::Dataset ds = load_aligned(o.dataset, c.align, "--dataset");
  if (time_policy) time_policy->validate(ds.meta.length);
  std::string csv = "sample,channel,t,original,augmented,original_amplitude,augmented_amplitude\n";
  const std::size_t n = std::min(o.count, ds.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < ds.meta.channels; ++ch) {
      const auto x = ds.channel(i, ch);
      SeededRng rng = SeededRng::derive(o.seed, i, ch);
      std::vector<double> y;
      if (time_policy) {
        y = aug::augment_time(x, *time_policy, rng);
      } else {
        const aug::FreqAugResult r = aug::augment_freq(forward_fft(x), *freq_policy, rng);
        if (r.warning) std::cerr << "sample " << i << " channel " << ch << ": " << *r.warning << "\n";
        const NumArray back = inverse_fft(r.spectrum);
        y.assign(back.data().begin(), back.data().end());
      }
      const std::vector<double> ax = nn::amplitude_input(x);
      const std::vector<double> ay = nn::amplitude_input(y);
      for (std::size_t t = 0; t < x.size(); ++t) {
        csv += std::to_string(i) + "," + std::to_string(ch) + "," + std::to_string(t) + "," +
               num(x[t]) + "," + num(y[t]) + "," + num(ax[t]) + "," + num(ay[t]) + "\n";
      }
    }
  }
  if (o.out.empty() || o.out == "-") out << csv;
  else write_file(o.out, csv);
  return kOk;
}

int export_embeddings(const Options& o, std::ostream&) {
  const cfg::CliConfig c = load_cfg(o.config, o.threads);
  ckpt::Loaded loaded = ckpt::load(checkpoint_prefix(o.checkpoint));
  const data::Dataset ds = load_aligned(o.dataset, c.align, "--dataset");
  const train::DatasetEmbeddings emb = train::embed_dataset(loaded.model, ds, c.run.threads);
  const std::vector<double> dist = train::cosine_distances(emb);
  const std::size_t dim = emb.z_t.dim(1);

  std::string csv = "sample,channel,label,cosine_distance";
  for (const char* z : {"z_t_", "z_f_"}) {
    for (std::size_t j = 0; j < dim; ++j) csv += "," + std::string(z) + std::to_string(j);
  }
  csv += "\n";
  const std::size_t k = ds.meta.channels;
  for (std::size_t r = 0; r < dist.size(); ++r) {
    const std::size_t i = r / k;
    csv += std::to_string(i) + "," + std::to_string(r % k) + "," +
           (ds.labeled() ? std::to_string(ds.labels[i]) : std::string()) + "," + num(dist[r]);
    for (const NumArray* z : {&emb.z_t, &emb.z_f}) {
      for (std::size_t j = 0; j < dim; ++j) csv += "," + num((*z)[r * dim + j]);
    }
    csv += "\n";
  }
  write_file(o.out, csv);
  return kOk;
}

int make_synthetic(const Options& o, std::ostream& out) {
  const data::SyntheticConfig sc;
  const data::SyntheticPair pair = data::make_synthetic_pair(sc, o.seed);
  const data::Splits s = data::split(pair.finetune, data::synthetic_split(sc, pair.finetune, o.seed));
  const fs::path dir = o.out;
  data::save_dataset(pair.pretrain, dir / "pretrain");
  data::save_dataset(s.finetune, dir / "finetune_train");
  data::save_dataset(s.validation, dir / "finetune_val");
  data::save_dataset(s.test, dir / "finetune_test");

  cfg::CliConfig c = cfg::parse_config(nlohmann::json::object());
  c.run.seed = o.seed;
  c.data = {"pretrain", "finetune_train", "finetune_val", "finetune_test"};
  write_file(dir / "config.json", pretty(cfg::to_json(c)));
  out << "wrote " << pair.pretrain.size() << " pre-training and " << pair.finetune.size()
      << " labeled samples to " << dir.string() << std::endl;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-frequency consistency pre-training for time series"};
  app.require_subcommand(1);
  Options o;

  auto threads = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker cap (0 = hardware concurrency)")
        ->check(CLI::NonNegativeNumber);
  };

  CLI::App* pre = app.add_subcommand("pretrain", "Label-free pre-training");
  pre->add_option("--config", o.config, "JSON config")->required();
  pre->add_option("--out", o.out, "Output directory")->required();
  threads(pre);

  CLI::App* fin = app.add_subcommand("finetune", "Fine-tune a checkpoint on labeled data");
  auto* ck = fin->add_option("--checkpoint", o.checkpoint, "Checkpoint prefix");
  auto* ri = fin->add_flag("--random-init", o.random_init, "Start from a fresh model instead");
  ck->excludes(ri);
  fin->add_option("--config", o.config, "JSON config")->required();
  fin->add_option("--out", o.out, "Output directory")->required();
  threads(fin);

  CLI::App* ev = app.add_subcommand("evaluate", "Task heads over frozen embeddings");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint prefix")->required();
  ev->add_option("--dataset", o.dataset, "Labeled dataset directory")->required();
  ev->add_option("--tasks", o.tasks, "Comma list of classify, cluster, anomaly");
  ev->add_option("--config", o.config, "JSON config (seed, alignment, detector)");
  ev->add_option("--out", o.out, "Output directory (default: current)");
  threads(ev);

  CLI::App* prev = app.add_subcommand("augment-preview", "Original vs augmented signals as CSV");
  prev->add_option("--dataset", o.dataset, "Dataset directory")->required();
  prev->add_option("--policy", o.policy, "Augmentation name")->required();
  prev->add_option("--n", o.count, "Number of samples");
  prev->add_option("--seed", o.seed, "Augmentation seed");
  prev->add_option("--config", o.config, "JSON config (time policy parameters, alignment)");
  prev->add_option("--out", o.out, "CSV path (default: stdout)");
  threads(prev);

  CLI::App* exp = app.add_subcommand("export-embeddings", "Per-sample z_t, z_f and their distance");
  exp->add_option("--checkpoint", o.checkpoint, "Checkpoint prefix")->required();
  exp->add_option("--dataset", o.dataset, "Dataset directory")->required();
  exp->add_option("--out", o.out, "CSV path")->required();
  exp->add_option("--config", o.config, "JSON config (alignment)");
  threads(exp);

  CLI::App* syn = app.add_subcommand("make-synthetic", "Write the synthetic transfer pair");
  syn->add_option("--out", o.out, "Output directory")->required();
  syn->add_option("--seed", o.seed, "Generator seed");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    if (fin->parsed() && !o.random_init && o.checkpoint.empty()) {
      throw CLI::RequiredError("--checkpoint or --random-init");
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfig;
  }

  try {
    if (pre->parsed()) return pretrain(o, out);
    if (fin->parsed()) return finetune(o, out);
    if (ev->parsed()) return evaluate(o, out);
    if (prev->parsed()) return augment_preview(o, out);
    if (exp->parsed()) return export_embeddings(o, out);
    if (syn->parsed()) return make_synthetic(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const AlignmentError& e) {
    err << "alignment error: " << e.what() << "\n"
        << "hint: set data.align_length (and data.align_mode) in the config so every dataset "
           "matches the checkpoint's input length; channel counts must match exactly\n";
    return kAlignment;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace tfc::cli
