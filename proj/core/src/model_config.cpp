#include "bendr/model_config.hpp"

#include "bendr/errors.hpp"
#include "bendr/ops.hpp"
#include "bendr/recording.hpp"

namespace bendr {

std::vector<std::size_t> ModelConfig::default_strides(std::size_t blocks) {
  if (blocks == 6) return {3, 2, 2, 2, 2, 2};
  if (blocks == 3) return {3, 2, 2};
  if (blocks == 0) throw ConfigError("conv stage needs at least one block");
  std::vector<std::size_t> s{3};
  s.resize(blocks, 2);
  return s;
}

ModelConfig ModelConfig::scaled(std::size_t dim) const {
  ModelConfig c = *this;
  c.conv_channels = dim;
  c.model_dim = dim;
  c.ffn_dim = 4 * dim;
  c.classifier_dims.clear();
  std::size_t in = dim;
  const std::size_t hidden = classifier_dims.empty() ? 0 : classifier_dims.size() - 1;
  for (std::size_t i = 0; i < hidden; ++i) {
    const std::size_t out = std::max<std::size_t>(in / 2, 2);
    c.classifier_dims.emplace_back(in, out);
    in = out;
  }
  c.classifier_dims.emplace_back(in, 2);
  return c;
}

ModelConfig ModelConfig::with_shape(std::size_t conv_blocks, std::size_t layers) const {
  ModelConfig c = *this;
  c.conv_strides = default_strides(conv_blocks);
  c.transformer_layers = layers;
  return c;
}

std::size_t ModelConfig::sequence_length(std::size_t samples) const {
  std::size_t len = samples;
  for (std::size_t s : conv_strides) len = conv1d_output_length(len, s, Conv1dOptions{s, 0, 1});
  return len;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (in_channels == 0) fail("in_channels must be positive");
  if (conv_strides.empty()) fail("at least one conv block required");
  for (std::size_t s : conv_strides) {
    if (s == 0) fail("conv strides must be positive");
  }
  if (model_dim != conv_channels) fail("model_dim must equal conv_channels");
  if (norm_groups == 0 || conv_channels % norm_groups != 0) {
    fail("conv_channels must be divisible by norm_groups");
  }
  if (heads == 0 || model_dim % heads != 0) fail("heads must divide model_dim");
  if (pos_groups == 0 || model_dim % pos_groups != 0) fail("pos_groups must divide model_dim");
  if (pos_kernel % 2 == 0) fail("pos_kernel must be odd");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must lie in [0, 1)");
  if (classifier_dims.empty()) fail("classifier needs at least one layer");
  if (classifier_dims.front().first != model_dim) fail("classifier input must equal model_dim");
  if (classifier_dims.back().second != 2) fail("classifier output must be 2");
  for (std::size_t i = 1; i < classifier_dims.size(); ++i) {
    if (classifier_dims[i].first != classifier_dims[i - 1].second) {
      fail("classifier layer widths do not chain");
    }
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"in_channels", c.in_channels},
                     {"conv_channels", c.conv_channels},
                     {"conv_strides", c.conv_strides},
                     {"norm_groups", c.norm_groups},
                     {"transformer_layers", c.transformer_layers},
                     {"heads", c.heads},
                     {"model_dim", c.model_dim},
                     {"ffn_dim", c.ffn_dim},
                     {"pos_kernel", c.pos_kernel},
                     {"pos_groups", c.pos_groups},
                     {"dropout_p", c.dropout_p},
                     {"classifier_dims", c.classifier_dims},
                     {"special_token_value", c.special_token_value}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  if (j.contains("model_dim") && !j.contains("classifier_dims")) {
    d = d.scaled(j.at("model_dim").get<std::size_t>());
  }
  c.in_channels = j.value("in_channels", d.in_channels);
  c.model_dim = j.value("model_dim", d.model_dim);
  c.conv_channels = j.value("conv_channels", c.model_dim);
  if (j.contains("conv_strides")) {
    c.conv_strides = j.at("conv_strides").get<std::vector<std::size_t>>();
  } else if (j.contains("conv_blocks")) {
    c.conv_strides = ModelConfig::default_strides(j.at("conv_blocks").get<std::size_t>());
  } else {
    c.conv_strides = d.conv_strides;
  }
  c.norm_groups = j.value("norm_groups", d.norm_groups);
  c.transformer_layers = j.value("transformer_layers", d.transformer_layers);
  c.heads = j.value("heads", d.heads);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.pos_kernel = j.value("pos_kernel", d.pos_kernel);
  c.pos_groups = j.value("pos_groups", d.pos_groups);
  c.dropout_p = j.value("dropout_p", d.dropout_p);
  c.classifier_dims = j.contains("classifier_dims")
                          ? j.at("classifier_dims").get<std::vector<std::pair<std::size_t, std::size_t>>>()
                          : d.classifier_dims;
  c.special_token_value = j.value("special_token_value", d.special_token_value);
}

void MaskSpec::validate() const {
  if (!(mask_prob > 0.0 && mask_prob <= 1.0)) {
    throw ConfigError("mask_prob must lie in (0, 1] for contrastive pretraining");
  }
  if (span_len < 1) throw ConfigError("span_len must be at least 1");
}

void to_json(nlohmann::json& j, const MaskSpec& m) {
  j = nlohmann::json{{"mask_prob", m.mask_prob}, {"span_len", m.span_len}};
}

void from_json(const nlohmann::json& j, MaskSpec& m) {
  MaskSpec d;
  m.mask_prob = j.value("mask_prob", d.mask_prob);
  m.span_len = j.value("span_len", d.span_len);
}

FreezePolicy parse_freeze_policy(const std::string& s) {
  const std::string k = normalize_label(s);
  if (k == "NONE") return FreezePolicy::None;
  if (k == "CONV" || k == "FREEZECONV" || k == "FREEZE_CONV") return FreezePolicy::FreezeConv;
  if (k == "TRANSFORMER" || k == "FREEZETRANSFORMER" || k == "FREEZE_TRANSFORMER") return FreezePolicy::FreezeTransformer;
  throw ConfigError("unknown freeze policy '" + s + "'");
}

InitPolicy parse_init_policy(const std::string& s) {
  const std::string k = normalize_label(s);
  if (k == "RANDOM") return InitPolicy::Random;
  if (k == "LOADSHARED" || k == "LOAD_SHARED" || k == "SHARED") return InitPolicy::LoadShared;
  if (k == "LOADDUPLICATE" || k == "LOAD_DUPLICATE" || k == "DUPLICATE") return InitPolicy::LoadDuplicate;
  throw ConfigError("unknown init policy '" + s + "'");
}

std::string to_string(FreezePolicy p) {
  switch (p) {
    case FreezePolicy::None: return "none";
    case FreezePolicy::FreezeConv: return "conv";
    case FreezePolicy::FreezeTransformer: return "transformer";
  }
  return "?";
}

std::string to_string(InitPolicy p) {
  switch (p) {
    case InitPolicy::Random: return "random";
    case InitPolicy::LoadShared: return "load_shared";
    case InitPolicy::LoadDuplicate: return "load_duplicate";
  }
  return "?";
}

}  // namespace bendr
