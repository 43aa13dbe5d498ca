#include "tfc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>

#include "tfc/errors.hpp"

namespace tfc::cfg {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) throw ConfigError(join(path, key) + ": unknown key");
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(join(path, key) + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(join(path, key) + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
          v.get<long long>() < 0) {
        throw ConfigError(join(path, key) + ": must be non-negative");
      }
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(join(path, key) + ": expected a number");
      out = v.get<T>();
    } else {
      if (!v.is_string()) throw ConfigError(join(path, key) + ": expected a string");
      out = v.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(join(path, key) + ": " + e.what());
  }
}

template <typename Enum, typename Parser>
void read_enum(const json& j, const std::string& path, const char* key, Enum& out,
               Parser parse) {
  std::string s;
  if (!j.contains(key)) return;
  read(j, path, key, s);
  try {
    out = parse(s);
  } catch (const ConfigError& e) {
    throw ConfigError(join(path, key) + ": " + e.what());
  }
}

aug::TimeAugPolicy parse_time_policy(const json& j, const std::string& path) {
  aug::TimeAugPolicy p;
  if (j.is_string()) {
    p.kind = aug::parse_time_kind(j.get<std::string>());
    return p;
  }
  reject_unknown(j, path,
                 {"kind", "jitter_sigma", "scale_lo", "scale_hi", "max_shift", "segment_ratio"});
  read_enum(j, path, "kind", p.kind, aug::parse_time_kind);
  read(j, path, "jitter_sigma", p.jitter_sigma);
  read(j, path, "scale_lo", p.scale_lo);
  read(j, path, "scale_hi", p.scale_hi);
  read(j, path, "max_shift", p.max_shift);
  read(j, path, "segment_ratio", p.segment_ratio);
  return p;
}

aug::FreqAugPolicy parse_freq_policy(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return named_freq_policy(j.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  aug::FreqAugPolicy p;
  reject_unknown(j, path, {"mode", "budget", "alpha", "band", "selection"});
  read_enum(j, path, "mode", p.mode, aug::parse_freq_mode);
  read(j, path, "budget", p.budget);
  read(j, path, "alpha", p.alpha);
  read_enum(j, path, "band", p.band, aug::parse_band);
  read_enum(j, path, "selection", p.selection, aug::parse_selection);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return p;
}

fs::path resolve(const std::string& s, const fs::path& base) {
  if (s.empty()) return {};
  fs::path p(s);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

aug::FreqAugPolicy named_freq_policy(const std::string& name) {
  const auto defaults = aug::default_freq_bank();
  for (const auto& p : defaults) {
    if (aug::to_string(p.mode) == name) return p;
  }
  for (const auto& np : aug::enumerate_policies()) {
    if (np.name == name) return np.policy;
  }
  throw ConfigError("unknown frequency policy '" + name + "'; valid names: " +
                    freq_policy_names());
}

std::string freq_policy_names() {
  std::string out;
  for (const auto& p : aug::default_freq_bank()) out += (out.empty() ? "" : ", ") + aug::to_string(p.mode);
  for (const auto& np : aug::enumerate_policies()) out += ", " + np.name;
  return out;
}

CliConfig parse_config(const json& doc, const fs::path& base_dir) {
  CliConfig c;
  train::RunConfig& r = c.run;
  reject_unknown(doc, "",
                 {"seed", "batch_size", "epochs", "loss", "optimizer", "model", "augment",
                  "finetune", "data", "evaluate"});
  read(doc, "", "seed", r.seed);
  read(doc, "", "batch_size", r.batch_size);
  read(doc, "", "epochs", r.epochs);

  if (doc.contains("loss")) {
    const json& j = doc["loss"];
    reject_unknown(j, "loss",
                   {"tau", "delta", "lambda", "hinge_consistency", "consistency",
                    "use_time_loss", "use_freq_loss", "include_positive", "reduction"});
    read(j, "loss", "tau", r.loss.tau);
    read(j, "loss", "delta", r.loss.delta);
    read(j, "loss", "lambda", r.loss.lambda);
    read(j, "loss", "hinge_consistency", r.loss.hinge_consistency);
    read_enum(j, "loss", "consistency", r.loss.consistency, loss::parse_consistency);
    read(j, "loss", "use_time_loss", r.loss.use_time_loss);
    read(j, "loss", "use_freq_loss", r.loss.use_freq_loss);
    read(j, "loss", "include_positive", r.loss.include_positive);
    read_enum(j, "loss", "reduction", r.loss.reduction, loss::parse_reduction);
  }
  if (doc.contains("optimizer")) {
    const json& j = doc["optimizer"];
    reject_unknown(j, "optimizer", {"lr", "beta1", "beta2", "eps", "weight_decay"});
    read(j, "optimizer", "lr", r.optimizer.lr);
    read(j, "optimizer", "beta1", r.optimizer.beta1);
    read(j, "optimizer", "beta2", r.optimizer.beta2);
    read(j, "optimizer", "eps", r.optimizer.eps);
    read(j, "optimizer", "weight_decay", r.optimizer.weight_decay);
  }
  if (doc.contains("model")) {
    const json& j = doc["model"];
    reject_unknown(j, "model", {"residual", "embedding"});
    read(j, "model", "residual", r.residual);
    read_enum(j, "model", "embedding", r.branches, nn::parse_branches);
  }
  if (doc.contains("augment")) {
    const json& j = doc["augment"];
    reject_unknown(j, "augment", {"time", "freq"});
    if (j.contains("time")) {
      if (!j["time"].is_array()) throw ConfigError("augment.time: expected an array");
      r.banks.time.clear();
      for (std::size_t i = 0; i < j["time"].size(); ++i) {
        r.banks.time.push_back(
            parse_time_policy(j["time"][i], "augment.time[" + std::to_string(i) + "]"));
      }
    }
    if (j.contains("freq")) {
      if (!j["freq"].is_array()) throw ConfigError("augment.freq: expected an array");
      r.banks.freq.clear();
      for (std::size_t i = 0; i < j["freq"].size(); ++i) {
        r.banks.freq.push_back(
            parse_freq_policy(j["freq"][i], "augment.freq[" + std::to_string(i) + "]"));
      }
    }
  }
  if (doc.contains("finetune")) {
    const json& j = doc["finetune"];
    reject_unknown(j, "finetune", {"enabled", "epochs", "num_classes", "joint_loss_weight"});
    read(j, "finetune", "enabled", r.finetune.enabled);
    read(j, "finetune", "epochs", r.finetune.epochs);
    read(j, "finetune", "num_classes", r.finetune.num_classes);
    read(j, "finetune", "joint_loss_weight", r.finetune.joint_loss_weight);
  }
  if (doc.contains("data")) {
    const json& j = doc["data"];
    reject_unknown(j, "data",
                   {"pretrain", "finetune_train", "finetune_val", "finetune_test", "align_length",
                    "align_mode"});
    std::string s;
    auto path_of = [&](const char* key, fs::path& out) {
      s.clear();
      read(j, "data", key, s);
      if (j.contains(key)) out = resolve(s, base_dir);
    };
    path_of("pretrain", c.data.pretrain);
    path_of("finetune_train", c.data.finetune_train);
    path_of("finetune_val", c.data.finetune_val);
    path_of("finetune_test", c.data.finetune_test);
    if (j.contains("align_length") && !j["align_length"].is_null()) {
      std::size_t len = 0;
      read(j, "data", "align_length", len);
      c.align.length = len;
    }
    read_enum(j, "data", "align_mode", c.align.mode, data::parse_align_mode);
  }
  if (doc.contains("evaluate")) {
    const json& j = doc["evaluate"];
    reject_unknown(j, "evaluate", {"detector", "nu", "features", "iterations", "step",
                                   "normal_class"});
    read_enum(j, "evaluate", "detector", c.anomaly.detector, eval::parse_detector);
    read(j, "evaluate", "nu", c.anomaly.nu);
    read(j, "evaluate", "features", c.anomaly.features);
    read(j, "evaluate", "iterations", c.anomaly.iterations);
    read(j, "evaluate", "step", c.anomaly.step);
    read(j, "evaluate", "normal_class", c.normal_class);
  }
  r.validate();
  return c;
}

CliConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

ojson to_json(const CliConfig& c) {
  const train::RunConfig& r = c.run;
  ojson time = ojson::array();
  for (const auto& p : r.banks.time) {
    time.push_back({{"kind", aug::to_string(p.kind)},
                    {"jitter_sigma", p.jitter_sigma},
                    {"scale_lo", p.scale_lo},
                    {"scale_hi", p.scale_hi},
                    {"max_shift", p.max_shift},
                    {"segment_ratio", p.segment_ratio}});
  }
  ojson freq = ojson::array();
  for (const auto& p : r.banks.freq) {
    freq.push_back({{"mode", aug::to_string(p.mode)},
                    {"budget", p.budget},
                    {"alpha", p.alpha},
                    {"band", aug::to_string(p.band)},
                    {"selection", aug::to_string(p.selection)}});
  }
  ojson data = {{"pretrain", c.data.pretrain.string()},
                {"finetune_train", c.data.finetune_train.string()},
                {"finetune_val", c.data.finetune_val.string()},
                {"finetune_test", c.data.finetune_test.string()},
                {"align_length", c.align.length ? ojson(*c.align.length) : ojson(nullptr)},
                {"align_mode", c.align.mode == data::AlignMode::zero_pad ? "zero_pad"
                                                                          : "downsample"}};
  return {
      {"seed", r.seed},
      {"batch_size", r.batch_size},
      {"epochs", r.epochs},
      {"loss",
       {{"tau", r.loss.tau},
        {"delta", r.loss.delta},
        {"lambda", r.loss.lambda},
        {"hinge_consistency", r.loss.hinge_consistency},
        {"consistency", loss::to_string(r.loss.consistency)},
        {"use_time_loss", r.loss.use_time_loss},
        {"use_freq_loss", r.loss.use_freq_loss},
        {"include_positive", r.loss.include_positive},
        {"reduction", loss::to_string(r.loss.reduction)}}},
      {"optimizer",
       {{"lr", r.optimizer.lr},
        {"beta1", r.optimizer.beta1},
        {"beta2", r.optimizer.beta2},
        {"eps", r.optimizer.eps},
        {"weight_decay", r.optimizer.weight_decay}}},
      {"model", {{"residual", r.residual}, {"embedding", nn::to_string(r.branches)}}},
      {"augment", {{"time", time}, {"freq", freq}}},
      {"finetune",
       {{"enabled", r.finetune.enabled},
        {"epochs", r.finetune.epochs},
        {"num_classes", r.finetune.num_classes},
        {"joint_loss_weight", r.finetune.joint_loss_weight}}},
      {"data", data},
      {"evaluate",
       {{"detector", eval::to_string(c.anomaly.detector)},
        {"nu", c.anomaly.nu},
        {"features", c.anomaly.features},
        {"iterations", c.anomaly.iterations},
        {"step", c.anomaly.step},
        {"normal_class", c.normal_class}}},
  };
}

void apply_env_overrides(CliConfig& config) {
  const char* raw = std::getenv("TFC_SEED");
  if (raw == nullptr) return;
  const std::string s(raw);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (s.empty() || s.front() == '-') throw std::invalid_argument(s);
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    throw ConfigError("TFC_SEED must be an unsigned 64-bit integer, got '" + s + "'");
  }
  if (used != s.size()) {
    throw ConfigError("TFC_SEED must be an unsigned 64-bit integer, got '" + s + "'");
  }
  config.run.seed = static_cast<std::uint64_t>(v);
}

}  // namespace tfc::cfg
