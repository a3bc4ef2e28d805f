#include "radargest/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "radargest/common/error.hpp"

namespace radargest::tensor {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + p.string());
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParamStore& params, const std::string& metadata_json) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create checkpoint directory " + dir + ": " + ec.message());

  json manifest;
  manifest["format"] = "radargest-checkpoint";
  manifest["dtype"] = "float64-le";
  json entries = json::array();
  std::string blob;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.at(i);
    entries.push_back({{"name", params.names()[i]}, {"shape", t.shape()}, {"offset", offset}});
    const std::size_t bytes = t.size() * sizeof(double);
    blob.append(reinterpret_cast<const char*>(t.data()), bytes);
    offset += bytes;
  }
  manifest["parameters"] = std::move(entries);
  manifest["metadata"] = json::parse(metadata_json);
  write_file(fs::path(dir) / "model.json", manifest.dump(2) + "\n");
  write_file(fs::path(dir) / "model.bin", blob);
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path json_path = fs::path(dir) / "model.json";
  const std::string text = read_file(json_path);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat, json_path.string() + ": " + e.what(),
                static_cast<std::int64_t>(e.byte > 0 ? e.byte - 1 : 0));
  }
  const std::string blob = read_file(fs::path(dir) / "model.bin");
  Checkpoint ck;
  try {
    for (const auto& e : manifest.at("parameters")) {
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const std::size_t bytes = shape_size(shape) * sizeof(double);
      if (offset + bytes > blob.size()) {
        throw Error(ErrorCode::kFormat, "model.bin is too short for parameter '" + name + "'",
                    static_cast<std::int64_t>(blob.size()));
      }
      std::vector<double> values(shape_size(shape));
      std::memcpy(values.data(), blob.data() + offset, bytes);
      ck.params.add(name, Tensor(shape, std::move(values)));
    }
    if (manifest.contains("metadata")) ck.metadata_json = manifest["metadata"].dump();
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, json_path.string() + ": " + e.what());
  }
  return ck;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t state) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string checkpoint_hash(const std::string& dir) {
  const std::string a = read_file(fs::path(dir) / "model.json");
  const std::string b = read_file(fs::path(dir) / "model.bin");
  const std::uint64_t h = fnv1a(b.data(), b.size(), fnv1a(a.data(), a.size()));
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace radargest::tensor
