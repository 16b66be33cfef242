#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bendr {

struct ModelConfig {
  std::size_t in_channels = 20;
  std::size_t conv_channels = 512;
  std::vector<std::size_t> conv_strides{3, 2, 2, 2, 2, 2};
  std::size_t norm_groups = 16;
  std::size_t transformer_layers = 4;
  std::size_t heads = 4;
  std::size_t model_dim = 512;
  std::size_t ffn_dim = 2048;
  std::size_t pos_kernel = 25;
  std::size_t pos_groups = 16;
  double dropout_p = 0.5;
  std::vector<std::pair<std::size_t, std::size_t>> classifier_dims{
      {512, 256}, {256, 128}, {128, 64}, {64, 2}};
  double special_token_value = -5.0;

  std::size_t conv_blocks() const { return conv_strides.size(); }

  // Default stride schedule for 3 or 6 blocks.
  static std::vector<std::size_t> default_strides(std::size_t blocks);

  // Same topology at a different width: conv/model width `dim`, FFN 4·dim,
  // classifier halving from dim down to 2.
  ModelConfig scaled(std::size_t dim) const;
  ModelConfig with_shape(std::size_t conv_blocks, std::size_t layers) const;

  // Tokens produced by the conv stage for a window of `samples` samples.
  std::size_t sequence_length(std::size_t samples) const;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct MaskSpec {
  double mask_prob = 0.065;
  std::size_t span_len = 10;

  void validate() const;
};

void to_json(nlohmann::json& j, const MaskSpec& m);
void from_json(const nlohmann::json& j, MaskSpec& m);

enum class FreezePolicy { None, FreezeConv, FreezeTransformer };
enum class InitPolicy { Random, LoadShared, LoadDuplicate };

FreezePolicy parse_freeze_policy(const std::string& s);
InitPolicy parse_init_policy(const std::string& s);
std::string to_string(FreezePolicy p);
std::string to_string(InitPolicy p);

}  // namespace bendr
