#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bendr/model_config.hpp"
#include "bendr/objectives.hpp"
#include "bendr/ops.hpp"
#include "bendr/params.hpp"
#include "bendr/rng.hpp"
#include "bendr/tensor.hpp"

namespace bendr {

// ---- per-sample traces kept for the backward pass ---------------------------

struct ConvBlockTrace {
  Tensor input;
  DropoutMask drop;
  NormCache norm;
  Tensor normed;  // group-norm output, GELU input
};

struct EncodeTrace {
  std::vector<ConvBlockTrace> blocks;
};

struct LayerTrace {
  NormCache ln1;
  AttentionCache attn;  // holds the normalised input
  DropoutMask drop_attn;
  NormCache ln2;
  Tensor ln2_out;
  Tensor ffn_pre;  // first FFN linear output, GELU input
  Tensor ffn_act;
  DropoutMask drop_ffn;
};

struct TransformerTrace {
  Tensor input;      // S×D
  Tensor pos_input;  // D×S
  Tensor pos_pre;    // grouped conv output, GELU input
  std::vector<LayerTrace> layers;
};

struct ClassifierTrace {
  std::vector<Tensor> inputs;  // per linear layer
  std::vector<Tensor> pre;     // per linear layer output
  std::vector<DropoutMask> drops;
  Tensor probs;
  std::size_t seq_len = 0;
  std::size_t width = 0;
};

struct MaskResult {
  Tensor seq;
  std::vector<std::size_t> indices;  // sorted, never contains 0
};

// Row of `value` inserted at position 0.
Tensor prepend_special_token(const Tensor& seq, double value);

// Chooses span starts among positions 1..S−1 of an (S)-row sequence without
// replacement: floor(mask_prob·(S−1) + u) starts, u ~ U[0,1). Each span covers
// span_len rows, truncated at the end. Masked rows become `mask_embedding`.
MaskResult apply_mask(const Tensor& seq, const MaskSpec& spec, const Tensor& mask_embedding, Rng& rng);

// ---- the network ------------------------------------------------------------

// Parameter naming:
//   conv.{i}.weight/.bias/.gn_gamma/.gn_beta     conv stage
//   mask_embedding, pos.weight/.bias, layer.{l}.*  transformer encoder
//   cls.{j}.weight/.bias                          classifier head
class Model {
 public:
  Model(ModelConfig config, ParamStore params);

  // Kaiming-style uniform(±1/√fan_in) weights and biases, unit/zero norm affine.
  static ParamStore init_random(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_trainable(FreezePolicy policy);
  bool conv_trainable() const;
  bool encoder_trainable() const;

  // Conv feature encoder: window C_in×T → sequence S×D.
  Tensor encode(const Tensor& window, bool train, Rng& rng, EncodeTrace* trace = nullptr) const;
  void encode_backward(const EncodeTrace& trace, const Tensor& grad_seq);

  // Positional grouped conv + pre-norm blocks; shape preserving.
  Tensor transformer_forward(const Tensor& seq, bool train, Rng& rng,
                             TransformerTrace* trace = nullptr) const;
  // Returns the gradient w.r.t. the transformer input.
  Tensor transformer_backward(const TransformerTrace& trace, const Tensor& grad_out,
                              bool accumulate_params = true);

  // Row 0 of the contextual sequence through the classifier; returns 1×2 probabilities.
  Tensor classify(const Tensor& context, bool train, Rng& rng, ClassifierTrace* trace = nullptr) const;
  // Returns the gradient w.r.t. the contextual sequence (non-zero in row 0 only).
  Tensor classify_backward(const ClassifierTrace& trace, const Tensor& grad_probs);

  // Full classification path in evaluation mode.
  Tensor predict(const Tensor& window) const;

  struct ClassifyTrace {
    EncodeTrace encode;
    TransformerTrace transformer;
    ClassifierTrace classifier;
  };
  Tensor forward_classify(const Tensor& window, bool train, Rng& rng, ClassifyTrace* trace) const;
  // Accumulates parameter gradients for every stage that still has trainable
  // parameters upstream.
  void backward_classify(const ClassifyTrace& trace, const Tensor& grad_probs);

  struct PretrainStats {
    double loss = 0.0;
    std::size_t masked = 0;
    double target_similarity = 0.0;
    double distractor_similarity = 0.0;
  };
  // Masked contrastive pass on one window: encode, prepend the special token,
  // mask, run the transformer, and align masked outputs with the unmasked
  // inputs. With `backward` set, parameter gradients are accumulated. A window
  // whose mask draw is empty yields masked == 0 and contributes nothing.
  PretrainStats pretrain_step(const Tensor& window, const MaskSpec& mask,
                              const ContrastiveSpec& contrastive, bool train, Rng& rng,
                              bool backward);

 private:
  struct ConvRefs { std::size_t weight, bias, gamma, beta; };
  struct LayerRefs {
    std::size_t ln1_gamma, ln1_beta, wq, wk, wv, wo, ln2_gamma, ln2_beta, ffn1_w, ffn1_b, ffn2_w,
        ffn2_b;
  };
  struct LinearRefs { std::size_t weight, bias; };

  const Tensor& v(std::size_t i) const { return params_.items()[i].value; }
  Tensor& g(std::size_t i) { return params_.items()[i].grad; }
  bool trainable(std::size_t i) const { return params_.items()[i].trainable; }
  std::size_t ref(const std::string& name) const;

  ModelConfig config_;
  ParamStore params_;
  std::vector<ConvRefs> conv_;
  std::size_t mask_embedding_ = 0, pos_weight_ = 0, pos_bias_ = 0;
  std::vector<LayerRefs> layers_;
  std::vector<LinearRefs> classifier_;
};

// LoadShared copies every parameter present in both configs (layer counts may
// differ); LoadDuplicate additionally fills extra transformer layers by cycling
// through the source layers in order. Anything not copied is randomised.
ParamStore init_weights(const ModelConfig& config, InitPolicy policy, const ParamStore* source,
                        Rng& rng);

bool is_conv_param(const std::string& name);
bool is_encoder_param(const std::string& name);
bool is_classifier_param(const std::string& name);

}  // namespace bendr
