#include "tfc/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tfc/errors.hpp"
#include "tfc/rng.hpp"

namespace tfc::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::span<const double> Dataset::sample(std::size_t i) const {
  if (i >= meta.num_samples) throw DataError("sample index " + std::to_string(i) + " out of range");
  return std::span<const double>(values).subspan(i * sample_stride(), sample_stride());
}

std::span<const double> Dataset::channel(std::size_t i, std::size_t c) const {
  if (c >= meta.channels) throw DataError("channel index " + std::to_string(c) + " out of range");
  return sample(i).subspan(c * meta.length, meta.length);
}

void Dataset::validate() const {
  if (meta.channels < 1) throw DataError("dataset needs at least one channel");
  if (meta.length < 2) throw DataError("dataset length must be >= 2");
  if (values.size() != meta.num_samples * sample_stride()) {
    throw DataError("dataset holds " + std::to_string(values.size()) + " values, meta implies " +
                    std::to_string(meta.num_samples * sample_stride()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite value in sample " + std::to_string(i / sample_stride()));
    }
  }
  if (meta.num_classes.has_value()) {
    if (*meta.num_classes < 1) throw DataError("num_classes must be >= 1");
    if (labels.size() != meta.num_samples) {
      throw DataError("labeled dataset needs one label per sample (" +
                      std::to_string(labels.size()) + " of " +
                      std::to_string(meta.num_samples) + ")");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= *meta.num_classes) {
        throw DataError("label " + std::to_string(labels[i]) + " of sample " +
                        std::to_string(i) + " outside [0, " +
                        std::to_string(*meta.num_classes) + ")");
      }
    }
  } else if (!labels.empty()) {
    throw DataError("labels present but num_classes is null");
  }
}

// ----------------------------------------------------------------------- io

namespace {

const std::set<std::string> kMetaKeys = {"name",           "num_samples", "channels",
                                         "length",         "sample_rate_hz", "num_classes",
                                         "format_version"};

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

DatasetMeta parse_meta(const json& j) {
  if (!j.is_object()) throw DataError("meta.json must hold an object");
  for (const auto& [key, _] : j.items()) {
    if (!kMetaKeys.contains(key)) throw DataError("meta.json: unknown key '" + key + "'");
  }
  DatasetMeta m;
  try {
    m.name = j.value("name", std::string{});
    m.num_samples = j.at("num_samples").get<std::size_t>();
    m.channels = j.at("channels").get<std::size_t>();
    m.length = j.at("length").get<std::size_t>();
    m.sample_rate_hz = j.value("sample_rate_hz", 0.0);
    if (j.contains("num_classes") && !j.at("num_classes").is_null()) {
      m.num_classes = j.at("num_classes").get<std::size_t>();
    }
    m.format_version = j.value("format_version", kFormatVersion);
  } catch (const json::exception& e) {
    throw DataError(std::string("meta.json: ") + e.what());
  }
  if (m.format_version != kFormatVersion) {
    throw DataError("meta.json: unsupported format_version " + std::to_string(m.format_version));
  }
  return m;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  Dataset ds;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw DataError("missing " + (dir / "meta.json").string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError("meta.json: " + std::string(e.what()));
    }
    ds.meta = parse_meta(j);
  }
  if (ds.meta.channels < 1 || ds.meta.length < 2) {
    throw DataError("meta.json: channels must be >= 1 and length >= 2");
  }
  const std::size_t count = ds.meta.num_samples * ds.meta.channels * ds.meta.length;
  const fs::path blob = dir / "data.bin";
  if (!fs::exists(blob)) throw DataError("missing " + blob.string());
  const auto actual = fs::file_size(blob);
  if (actual != count * 4) {
    throw DataError("data.bin size mismatch: expected " + std::to_string(count * 4) +
                    " bytes, found " + std::to_string(actual));
  }
  {
    std::ifstream in(blob, std::ios::binary);
    std::vector<std::uint32_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
    ds.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t bits = to_little(raw[i]);
      float f;
      std::memcpy(&f, &bits, 4);
      ds.values[i] = f;
    }
  }
  const fs::path labels = dir / "labels.csv";
  if (ds.meta.num_classes.has_value()) {
    std::ifstream in(labels);
    if (!in) throw DataError("labeled dataset is missing " + labels.string());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "index,label") throw DataError("labels.csv: header must be 'index,label'");
    ds.labels.assign(ds.meta.num_samples, -1);
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ss(line);
      long long index = -1, label = -1;
      char comma = 0;
      if (!(ss >> index >> comma >> label) || comma != ',') {
        throw DataError("labels.csv: malformed row " + std::to_string(row));
      }
      if (index < 0 || static_cast<std::size_t>(index) >= ds.meta.num_samples) {
        throw DataError("labels.csv: index " + std::to_string(index) + " out of range at row " +
                        std::to_string(row));
      }
      if (ds.labels[static_cast<std::size_t>(index)] != -1) {
        throw DataError("labels.csv: duplicate index " + std::to_string(index));
      }
      if (label < 0) throw DataError("labels.csv: negative label at row " + std::to_string(row));
      ds.labels[static_cast<std::size_t>(index)] = static_cast<int>(label);
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (ds.labels[i] == -1) throw DataError("labels.csv: no label for sample " + std::to_string(i));
    }
  } else if (fs::exists(labels)) {
    throw DataError("labels.csv present but meta.json num_classes is null");
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir);
  json meta = {{"name", dataset.meta.name},
               {"num_samples", dataset.meta.num_samples},
               {"channels", dataset.meta.channels},
               {"length", dataset.meta.length},
               {"sample_rate_hz", dataset.meta.sample_rate_hz},
               {"num_classes", nullptr},
               {"format_version", dataset.meta.format_version}};
  if (dataset.meta.num_classes) meta["num_classes"] = *dataset.meta.num_classes;
  {
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    std::vector<std::uint32_t> raw(dataset.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto f = static_cast<float>(dataset.values[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      raw[i] = to_little(bits);
    }
    std::ofstream out(dir / "data.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
    if (!out) throw DataError("failed writing " + (dir / "data.bin").string());
  }
  const fs::path labels = dir / "labels.csv";
  if (dataset.labeled()) {
    std::ofstream out(labels);
    out << "index,label\n";
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
      out << i << ',' << dataset.labels[i] << '\n';
    }
  } else if (fs::exists(labels)) {
    fs::remove(labels);
  }
}

// ---------------------------------------------------------------- alignment

AlignMode parse_align_mode(const std::string& s) {
  if (s == "zero_pad") return AlignMode::zero_pad;
  if (s == "downsample") return AlignMode::downsample;
  throw ConfigError("unknown alignment mode '" + s + "' (expected zero_pad, downsample)");
}

std::vector<double> align_length(std::span<const double> x, std::size_t target,
                                 AlignMode mode) {
  if (target < 2) throw ContractError("align_length: target must be >= 2");
  std::vector<double> out;
  out.reserve(target);
  if (mode == AlignMode::zero_pad) {
    if (x.size() > target) {
      throw ContractError("zero_pad cannot shorten length " + std::to_string(x.size()) +
                          " to " + std::to_string(target) + "; use downsample");
    }
    out.assign(x.begin(), x.end());
  } else {
    const std::size_t step = std::max<std::size_t>(1, (x.size() + target - 1) / target);
    for (std::size_t i = 0; i < x.size() && out.size() < target; i += step) out.push_back(x[i]);
  }
  out.resize(target, 0.0);
  return out;
}

Dataset align_dataset(const Dataset& dataset, std::size_t target, AlignMode mode) {
  Dataset out;
  out.meta = dataset.meta;
  out.meta.length = target;
  out.labels = dataset.labels;
  out.values.reserve(dataset.size() * dataset.meta.channels * target);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t c = 0; c < dataset.meta.channels; ++c) {
      const auto aligned = align_length(dataset.channel(i, c), target, mode);
      out.values.insert(out.values.end(), aligned.begin(), aligned.end());
    }
  }
  return out;
}

// ------------------------------------------------------------------- splits

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices,
               const std::string& name) {
  Dataset out;
  out.meta = dataset.meta;
  out.meta.name = name;
  out.meta.num_samples = indices.size();
  out.values.reserve(indices.size() * dataset.sample_stride());
  for (std::size_t idx : indices) {
    const auto s = dataset.sample(idx);
    out.values.insert(out.values.end(), s.begin(), s.end());
    if (dataset.labeled()) out.labels.push_back(dataset.labels[idx]);
  }
  return out;
}

SplitSpec make_split(const Dataset& dataset, std::size_t per_class, std::size_t validation,
                     std::size_t test, std::uint64_t seed) {
  if (!dataset.labeled()) throw DataError("split needs a labeled dataset");
  SeededRng rng(seed);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);
  SplitSpec spec;
  spec.seed = seed;
  std::vector<std::size_t> rest;
  for (auto& [label, members] : by_class) {
    if (members.size() < per_class) {
      throw DataError("class " + std::to_string(label) + " has " +
                      std::to_string(members.size()) + " samples, " +
                      std::to_string(per_class) + " requested for fine-tuning");
    }
    rng.shuffle(members);
    spec.finetune.insert(spec.finetune.end(), members.begin(), members.begin() + per_class);
    rest.insert(rest.end(), members.begin() + per_class, members.end());
  }
  if (rest.size() < validation + test) {
    throw DataError("only " + std::to_string(rest.size()) + " samples left for " +
                    std::to_string(validation) + " validation + " + std::to_string(test) +
                    " test");
  }
  std::sort(rest.begin(), rest.end());
  rng.shuffle(rest);
  spec.validation.assign(rest.begin(), rest.begin() + validation);
  spec.test.assign(rest.begin() + validation, rest.begin() + validation + test);
  std::sort(spec.finetune.begin(), spec.finetune.end());
  std::sort(spec.validation.begin(), spec.validation.end());
  std::sort(spec.test.begin(), spec.test.end());
  return spec;
}

Splits split(const Dataset& dataset, const SplitSpec& spec) {
  std::set<std::size_t> seen;
  for (const auto* list : {&spec.finetune, &spec.validation, &spec.test}) {
    for (std::size_t idx : *list) {
      if (idx >= dataset.size()) throw DataError("split index " + std::to_string(idx) + " out of range");
      if (!seen.insert(idx).second) {
        throw DataError("split index " + std::to_string(idx) + " appears in more than one subset");
      }
    }
  }
  const std::string base = dataset.meta.name;
  return Splits{subset(dataset, spec.finetune, base + "_finetune"),
                subset(dataset, spec.validation, base + "_validation"),
                subset(dataset, spec.test, base + "_test")};
}

// ---------------------------------------------------------------- synthetic

void SyntheticConfig::validate() const {
  if (pretrain_samples < 2) throw ConfigError("synthetic: pretrain_samples must be >= 2");
  if (length < 8) throw ConfigError("synthetic: length must be >= 8");
  const double nyquist = static_cast<double>(length) / 2.0;
  auto band_ok = [&](double lo, double hi) { return lo > 0.0 && lo <= hi && hi < nyquist; };
  if (!band_ok(band_a_lo, band_a_hi) || !band_ok(class0_lo, class0_hi) ||
      !band_ok(class1_lo, class1_hi)) {
    throw ConfigError("synthetic: frequency bands must satisfy 0 < lo <= hi < length/2");
  }
  if (class0_hi >= class1_lo) throw ConfigError("synthetic: class bands must not overlap");
  if (amplitude_jitter < 0.0 || amplitude_jitter >= 1.0) {
    throw ConfigError("synthetic: amplitude_jitter must lie in [0, 1)");
  }
  if (distractor_lo < 0.0 || distractor_lo > distractor_hi) {
    throw ConfigError("synthetic: distractor amplitude range invalid");
  }
  if (pretrain_noise < 0.0 || finetune_noise < 0.0) throw ConfigError("synthetic: negative noise");
}

std::size_t SyntheticConfig::finetune_total() const noexcept {
  // Sized so the split leaves exactly validation + test after the balanced
  // fine-tuning draw; rounded up to an even count for class balance.
  const std::size_t total = 2 * finetune_per_class + validation + test;
  return total + (total % 2);
}

namespace {

void add_sinusoid(std::vector<double>& x, double freq, double amp, double phase) {
  const double n = static_cast<double>(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    x[t] += amp * std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(t) / n + phase);
  }
}

void finish(std::vector<double>& x, double noise, SeededRng& rng, std::vector<double>& out) {
  for (double& v : x) {
    v += rng.normal(0.0, noise);
    // Stored as float32 on disk; round now so memory and files agree.
    out.push_back(static_cast<double>(static_cast<float>(v)));
  }
}

}  // namespace

SyntheticPair make_synthetic_pair(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeededRng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  SyntheticPair pair;

  Dataset& pre = pair.pretrain;
  pre.meta = {"synthetic_pretrain", cfg.pretrain_samples, 1, cfg.length, cfg.sample_rate_hz,
              std::nullopt, kFormatVersion};
  pre.values.reserve(cfg.pretrain_samples * cfg.length);
  for (std::size_t i = 0; i < cfg.pretrain_samples; ++i) {
    std::vector<double> x(cfg.length, 0.0);
    const auto components = static_cast<int>(rng.uniform_int(1, 3));
    for (int c = 0; c < components; ++c) {
      const double f = rng.uniform(cfg.band_a_lo, cfg.band_a_hi);
      const double a = rng.uniform(0.5, 1.5);
      add_sinusoid(x, f, a, rng.uniform(0.0, two_pi));
    }
    finish(x, cfg.pretrain_noise, rng, pre.values);
  }

  Dataset& ft = pair.finetune;
  const std::size_t total = cfg.finetune_total();
  ft.meta = {"synthetic_finetune", total, 1, cfg.length, cfg.sample_rate_hz,
             std::size_t{2}, kFormatVersion};
  ft.values.reserve(total * cfg.length);
  for (std::size_t i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> x(cfg.length, 0.0);
    const double f = label == 0 ? rng.uniform(cfg.class0_lo, cfg.class0_hi)
                                : rng.uniform(cfg.class1_lo, cfg.class1_hi);
    const double amp = rng.uniform(1.0 - cfg.amplitude_jitter, 1.0 + cfg.amplitude_jitter);
    add_sinusoid(x, f, amp, rng.uniform(0.0, two_pi));
    const double fd = rng.uniform(cfg.class0_lo, cfg.class1_hi);
    add_sinusoid(x, fd, amp * rng.uniform(cfg.distractor_lo, cfg.distractor_hi),
                 rng.uniform(0.0, two_pi));
    finish(x, cfg.finetune_noise, rng, ft.values);
    ft.labels.push_back(label);
  }
  return pair;
}

SplitSpec synthetic_split(const SyntheticConfig& cfg, const Dataset& finetune,
                          std::uint64_t seed) {
  return make_split(finetune, cfg.finetune_per_class, cfg.validation, cfg.test, seed);
}

}  // namespace tfc::data
