#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tfc/datasets.hpp"
#include "tfc/training.hpp"

namespace tfc::cfg {

struct DataPaths {
  std::filesystem::path pretrain;
  std::filesystem::path finetune_train;
  std::filesystem::path finetune_val;
  std::filesystem::path finetune_test;
};

struct AlignConfig {
  std::optional<std::size_t> length;  // unset: keep the dataset length
  data::AlignMode mode = data::AlignMode::zero_pad;
};

struct CliConfig {
  train::RunConfig run;
  DataPaths data;
  AlignConfig align;
  eval::AnomalyConfig anomaly;
  int normal_class = 0;
};

// Parses a config document. Every key is optional; unknown keys raise
// ConfigError naming the dotted path. Relative data paths resolve against
// `base_dir`.
CliConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
CliConfig load_config(const std::filesystem::path& path);

// Fully resolved document; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const CliConfig& config);

// TFC_SEED, when set, replaces the configured seed. Throws ConfigError on a
// value that is not an unsigned 64-bit integer.
void apply_env_overrides(CliConfig& config);

// Name -> policy lookup for the eight band/budget/selection policies plus
// "remove" and "add" (full band, E = 1, alpha = 0.5).
aug::FreqAugPolicy named_freq_policy(const std::string& name);
std::string freq_policy_names();

}  // namespace tfc::cfg
