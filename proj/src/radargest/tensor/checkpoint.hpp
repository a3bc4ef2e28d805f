#pragma once

#include <cstdint>
#include <string>

#include "radargest/tensor/tensor.hpp"

namespace radargest::tensor {

// A checkpoint directory holds `model.json` (ordered {name, shape, offset}
// entries plus free-form metadata) and `model.bin` (little-endian float64
// values concatenated in manifest order).
struct Checkpoint {
  ParamStore params;
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::string& dir, const ParamStore& params, const std::string& metadata_json = "{}");
Checkpoint load_checkpoint(const std::string& dir);

// FNV-1a over model.json followed by model.bin, as 16 hex digits.
std::string checkpoint_hash(const std::string& dir);

// FNV-1a 64 of a byte string, continued from `state`.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t state = 0xcbf29ce484222325ULL);

}  // namespace radargest::tensor
