#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bendr/params.hpp"

namespace bendr {

// Single-file container: "BNDRCKPT", u64 LE manifest length, JSON manifest,
// then every array as little-endian float32 in manifest order. The manifest
// lists names, shapes and byte offsets and carries `config` plus its hash.
struct Checkpoint {
  ParamStore params;
  nlohmann::json config;
  std::string config_hash;
};

std::string config_hash(const nlohmann::json& config);

std::string serialize_checkpoint(const ParamStore& params, const nlohmann::json& config);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rounds every value to float32, i.e. what a save/load round trip yields.
void quantize_to_float(ParamStore& params);

}  // namespace bendr
