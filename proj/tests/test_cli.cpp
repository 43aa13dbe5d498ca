#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "tfc/datasets.hpp"

using namespace tfc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result tfc_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

// Small pair of datasets plus a fast config, built once per process.
struct Fixture {
  fs::path root = fs::temp_directory_path() / "tfc_test_cli";
  fs::path config = root / "config.json";

  Fixture() {
    fs::remove_all(root);
    data::SyntheticConfig sc;
    sc.pretrain_samples = 48;
    sc.length = 64;
    sc.sample_rate_hz = 64.0;
    sc.band_a_hi = 14.0;
    sc.class0_lo = 4.0;
    sc.class0_hi = 8.0;
    sc.class1_lo = 10.0;
    sc.class1_hi = 14.0;
    sc.finetune_per_class = 8;
    sc.validation = 8;
    sc.test = 60;
    const auto pair = data::make_synthetic_pair(sc, 3);
    const auto s = data::split(pair.finetune, data::synthetic_split(sc, pair.finetune, 3));
    data::save_dataset(pair.pretrain, root / "pre");
    data::save_dataset(s.finetune, root / "train");
    data::save_dataset(s.validation, root / "val");
    data::save_dataset(s.test, root / "test");
    const json c = {{"seed", 5},
                    {"batch_size", 16},
                    {"epochs", 2},
                    {"finetune", {{"epochs", 2}}},
                    {"data",
                     {{"pretrain", "pre"},
                      {"finetune_train", "train"},
                      {"finetune_val", "val"},
                      {"finetune_test", "test"}}}};
    std::ofstream(config) << c.dump();
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("pretrain, finetune and evaluate through the command line") {
  Fixture& f = fixture();
  const fs::path pre = f.root / "run_pre";
  Result r = tfc_cli({"pretrain", "--config", f.config.string(), "--out", pre.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("epoch=1 total=") == 0);
  CHECK(r.out.find("epoch=2 total=") != std::string::npos);
  for (const char* name : {"pretrained.manifest.json", "pretrained.params.bin", "loss_curve.csv", "run.json"}) {
    CHECK(fs::exists(pre / name));
  }
  const auto curve = read_csv(pre / "loss_curve.csv");
  CHECK(curve.size() == 3);
  CHECK(curve[0] == std::vector<std::string>{"epoch", "loss_t", "loss_f", "loss_c", "total"});
  const json run = json::parse(std::ifstream(pre / "run.json"));
  CHECK(run["seed"] == 5);
  CHECK(run["checkpoint"]["blob_sha1"].get<std::string>().size() == 40);

  const fs::path ft = f.root / "run_ft";
  r = tfc_cli({"finetune", "--config", f.config.string(), "--checkpoint", (pre / "pretrained").string(),
               "--out", ft.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json fm = json::parse(std::ifstream(ft / "metrics.json"));
  CHECK(fm["classification"].contains("f1_macro"));

  const fs::path ev = f.root / "run_eval";
  r = tfc_cli({"evaluate", "--config", f.config.string(), "--checkpoint", (ft / "finetuned.manifest.json").string(),
               "--dataset", (f.root / "test").string(), "--tasks", "classify,cluster", "--out", ev.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json em = json::parse(std::ifstream(ev / "metrics.json"));
  CHECK(em["classification"]["f1_macro"] == fm["classification"]["f1_macro"]);
  for (const char* k : {"silhouette", "ari", "nmi"}) CHECK(em["clustering"].contains(k));
  CHECK(fs::exists(ev / "metrics.csv"));

  SUBCASE("cluster only on the pre-trained checkpoint") {
    r = tfc_cli({"evaluate", "--checkpoint", (pre / "pretrained").string(), "--dataset",
                 (f.root / "test").string(), "--tasks", "cluster", "--out", (f.root / "cl").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json cm = json::parse(std::ifstream(f.root / "cl" / "metrics.json"));
    CHECK(cm.contains("clustering"));
    CHECK(!cm.contains("classification"));
  }
  SUBCASE("classification needs a head") {
    r = tfc_cli({"evaluate", "--checkpoint", (pre / "pretrained").string(), "--dataset",
                 (f.root / "test").string(), "--tasks", "classify"});
    CHECK(r.code == cli::kConfig);
  }
  SUBCASE("rerun gives an identical checkpoint") {
    const fs::path again = f.root / "run_pre_again";
    REQUIRE(tfc_cli({"pretrain", "--config", f.config.string(), "--out", again.string()}).code == 0);
    const json a = json::parse(std::ifstream(pre / "run.json"));
    const json b = json::parse(std::ifstream(again / "run.json"));
    CHECK(a["checkpoint"]["blob_sha1"] == b["checkpoint"]["blob_sha1"]);
  }
  SUBCASE("export embeddings") {
    const fs::path csv = f.root / "emb.csv";
    r = tfc_cli({"export-embeddings", "--checkpoint", (pre / "pretrained").string(), "--dataset",
                 (f.root / "test").string(), "--out", csv.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = read_csv(csv);
    REQUIRE(rows.size() == 61);
    CHECK(rows[0][3] == "cosine_distance");
    CHECK(rows[0].size() == 4 + 2 * 128);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      double tt = 0, ff = 0, tf = 0;
      for (std::size_t j = 0; j < 128; ++j) {
        const double a = std::stod(rows[i][4 + j]), b = std::stod(rows[i][4 + 128 + j]);
        tt += a * a;
        ff += b * b;
        tf += a * b;
      }
      CHECK(std::abs(1.0 - tf / std::sqrt(tt * ff) - std::stod(rows[i][3])) < 1e-9);
    }
  }
}

TEST_CASE("random-init fine-tuning skips the checkpoint") {
  Fixture& f = fixture();
  const Result r = tfc_cli({"finetune", "--config", f.config.string(), "--random-init", "--out",
                            (f.root / "rand").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json run = json::parse(std::ifstream(f.root / "rand" / "run.json"));
  CHECK(run["source"] == "random_init");
  CHECK(tfc_cli({"finetune", "--config", f.config.string(), "--out", (f.root / "x").string()}).code ==
        cli::kConfig);
}

TEST_CASE("exit codes") {
  Fixture& f = fixture();
  std::ofstream(f.root / "missing.json") << R"({"data": {"pretrain": "does_not_exist"}})";
  Result r = tfc_cli({"pretrain", "--config", (f.root / "missing.json").string(), "--out", (f.root / "m").string()});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("does_not_exist") != std::string::npos);

  std::ofstream(f.root / "typo.json") << R"({"loss": {"lamda": 1}})";
  r = tfc_cli({"pretrain", "--config", (f.root / "typo.json").string(), "--out", (f.root / "m").string()});
  CHECK(r.code == cli::kConfig);
  CHECK(r.err.find("loss.lamda") != std::string::npos);

  r = tfc_cli({"augment-preview", "--dataset", (f.root / "test").string(), "--policy", "wobble"});
  CHECK(r.code == cli::kConfig);
  CHECK(r.err.find("low-single-uniform") != std::string::npos);
  CHECK(r.err.find("jitter") != std::string::npos);

  CHECK(tfc_cli({}).code == cli::kConfig);
  CHECK(tfc_cli({"pretrain"}).code == cli::kConfig);
}

TEST_CASE("alignment mismatch exits with a hint") {
  Fixture& f = fixture();
  const fs::path pre = f.root / "align_pre";
  REQUIRE(tfc_cli({"pretrain", "--config", f.config.string(), "--out", pre.string()}).code == 0);
  std::ofstream(f.root / "long.json") << R"({"data": {"align_length": 128}})";
  const Result r = tfc_cli({"export-embeddings", "--config", (f.root / "long.json").string(), "--checkpoint",
                            (pre / "pretrained").string(), "--dataset", (f.root / "test").string(), "--out",
                            (f.root / "e.csv").string()});
  CHECK(r.code == cli::kAlignment);
  CHECK(r.err.find("align_length") != std::string::npos);
}

TEST_CASE("augment preview") {
  Fixture& f = fixture();
  std::ofstream(f.root / "still.json") << R"({"augment": {"time": [{"kind": "jitter", "jitter_sigma": 0}]}})";
  const fs::path csv = f.root / "preview.csv";
  Result r = tfc_cli({"augment-preview", "--dataset", (f.root / "test").string(), "--policy", "jitter", "--n", "2",
                      "--config", (f.root / "still.json").string(), "--out", csv.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto rows = read_csv(csv);
  REQUIRE(rows.size() == 1 + 2 * 64);
  CHECK(rows[0] == std::vector<std::string>{"sample", "channel", "t", "original", "augmented", "original_amplitude",
                                            "augmented_amplitude"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][3] == rows[i][4]);
    CHECK(rows[i][5] == rows[i][6]);
  }

  r = tfc_cli({"augment-preview", "--dataset", (f.root / "test").string(), "--policy", "remove", "--n", "1",
               "--seed", "4", "--out", csv.string()});
  REQUIRE(r.code == 0);
  rows = read_csv(csv);
  std::size_t differing = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    differing += std::abs(std::stod(rows[i][5]) - std::stod(rows[i][6])) > 1e-9;
  }
  // One removed bin shows up twice in the symmetric amplitude spectrum; the
  // rest only carry round-trip noise.
  CHECK(differing <= 2);
  CHECK(differing >= 1);
}

TEST_CASE("make-synthetic writes a runnable layout") {
  const fs::path dir = fs::temp_directory_path() / "tfc_test_cli_synth";
  fs::remove_all(dir);
  const Result r = tfc_cli({"make-synthetic", "--out", dir.string(), "--seed", "2"});
  REQUIRE(r.code == 0);
  for (const char* d : {"pretrain", "finetune_train", "finetune_val", "finetune_test"}) {
    CHECK(fs::exists(dir / d / "meta.json"));
  }
  const json c = json::parse(std::ifstream(dir / "config.json"));
  CHECK(c["seed"] == 2);
  CHECK(c["data"]["finetune_test"] == "finetune_test");
  CHECK(data::load_dataset(dir / "finetune_train").size() == 60);
}
