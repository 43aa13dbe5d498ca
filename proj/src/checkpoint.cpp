#include "tfc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "tfc/errors.hpp"

namespace tfc::ckpt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

fs::path manifest_path(const fs::path& prefix) {
  return fs::path(prefix.string() + ".manifest.json");
}

fs::path blob_path(const fs::path& prefix) { return fs::path(prefix.string() + ".params.bin"); }

std::string git_blob_sha1(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

namespace {

void put_f32(std::string& out, double v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

double get_f32(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void round_to_f32(ad::ParamStore& store) {
  for (auto& p : store.entries()) {
    for (auto& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::string save(const nn::TfcModel& model, const fs::path& prefix, const json& run) {
  std::string blob;
  blob.reserve(model.params().total_values() * 4);
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params().entries()) {
    for (double v : p.value.data()) put_f32(blob, v);
    table.push_back({{"name", p.name},
                     {"shape", p.value.shape()},
                     {"offset", offset},
                     {"dtype", "f32"}});
    offset += p.value.size() * 4;
  }
  const std::string sha = git_blob_sha1(blob);
  const auto& arch = model.arch();
  json manifest = {
      {"format_version", kFormatVersion},
      {"arch",
       {{"input_length", arch.input_length},
        {"channels", arch.channels},
        {"residual", arch.residual},
        {"branches", nn::to_string(arch.branches)},
        {"num_classes", model.num_classes()}}},
      {"params", table},
      {"blob_bytes", blob.size()},
      {"blob_sha1", sha},
      {"run", run},
  };
  write_file(blob_path(prefix), blob);
  write_file(manifest_path(prefix), manifest.dump(2) + "\n");
  return sha;
}

Loaded load(const fs::path& prefix) {
  const fs::path mpath = manifest_path(prefix);
  if (!fs::exists(mpath)) throw DataError("checkpoint manifest not found: " + mpath.string());
  json manifest;
  try {
    manifest = json::parse(read_file(mpath));
  } catch (const json::parse_error& e) {
    throw DataError("malformed checkpoint manifest " + mpath.string() + ": " + e.what());
  }
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("unsupported checkpoint format_version in " + mpath.string());
    }
    const std::string blob = read_file(blob_path(prefix));
    const auto expected_bytes = manifest.at("blob_bytes").get<std::size_t>();
    if (blob.size() != expected_bytes) {
      throw DataError("checkpoint blob " + blob_path(prefix).string() + " has " +
                      std::to_string(blob.size()) + " bytes, manifest says " +
                      std::to_string(expected_bytes));
    }
    const std::string sha = git_blob_sha1(blob);
    if (sha != manifest.at("blob_sha1").get<std::string>()) {
      throw DataError("checkpoint blob hash mismatch for " + blob_path(prefix).string());
    }
    const auto& a = manifest.at("arch");
    nn::ArchConfig arch;
    arch.input_length = a.at("input_length").get<std::size_t>();
    arch.channels = a.at("channels").get<std::size_t>();
    arch.residual = a.at("residual").get<bool>();
    arch.branches = nn::parse_branches(a.at("branches").get<std::string>());
    const auto num_classes = a.at("num_classes").get<std::size_t>();

    ad::ParamStore store;
    for (const auto& entry : manifest.at("params")) {
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw DataError("unsupported parameter dtype in " + mpath.string());
      }
      const Shape shape = entry.at("shape").get<Shape>();
      const auto off = entry.at("offset").get<std::size_t>();
      const std::size_t count = shape_size(shape);
      if (off + count * 4 > blob.size()) {
        throw DataError("parameter " + entry.at("name").get<std::string>() +
                        " extends past the end of the blob");
      }
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(blob.data() + off + 4 * i);
      store.add(entry.at("name").get<std::string>(),
                NumArray::from_external(shape, std::move(values)));
    }
    return Loaded{nn::restore_model(arch, num_classes, std::move(store)), manifest.at("run"), sha};
  } catch (const json::exception& e) {
    throw DataError("invalid checkpoint manifest " + mpath.string() + ": " + e.what());
  }
}

}  // namespace tfc::ckpt
