#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tfc/model.hpp"

namespace tfc::ckpt {

inline constexpr int kFormatVersion = 1;

// A checkpoint is two files sharing a path prefix:
//   <prefix>.manifest.json  architecture, parameter table, run metadata
//   <prefix>.params.bin     little-endian f32 values in manifest order
struct Loaded {
  nn::TfcModel model;
  nlohmann::ordered_json run;
  std::string blob_sha1;
};

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);

// Git blob id ("blob <size>\0" + bytes) as lowercase hex.
std::string git_blob_sha1(const std::string& bytes);

// Parameters are rounded to f32. Returns the blob hash recorded in the
// manifest. `run` must not contain wall-clock data if byte-stable output is
// wanted.
std::string save(const nn::TfcModel& model, const std::filesystem::path& prefix,
                 const nlohmann::ordered_json& run = nlohmann::ordered_json::object());

// Throws DataError on missing/corrupt files and AlignmentError when the
// parameter table does not match the recorded architecture.
Loaded load(const std::filesystem::path& prefix);

// Rounds every parameter to f32 in place, matching what save/load would do.
void round_to_f32(ad::ParamStore& store);

}  // namespace tfc::ckpt
