#include "bendr/model.hpp"

#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

namespace {

std::string conv_name(std::size_t i, const char* leaf) {
  return "conv." + std::to_string(i) + "." + leaf;
}
std::string layer_name(std::size_t l, const char* leaf) {
  return "layer." + std::to_string(l) + "." + leaf;
}
std::string cls_name(std::size_t j, const char* leaf) {
  return "cls." + std::to_string(j) + "." + leaf;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

void add_into(Tensor& dst, const Tensor& src) { dst += src; }

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

bool is_conv_param(const std::string& name) { return starts_with(name, "conv."); }
bool is_encoder_param(const std::string& name) {
  return name == "mask_embedding" || starts_with(name, "pos.") || starts_with(name, "layer.");
}
bool is_classifier_param(const std::string& name) { return starts_with(name, "cls."); }

// ---- free functions ---------------------------------------------------------

Tensor prepend_special_token(const Tensor& seq, double value) {
  const std::size_t width = seq.rank() == 2 ? seq.dim(1) : seq.cols();
  const std::size_t rows = seq.empty() ? 0 : seq.rows();
  Tensor out({rows + 1, width});
  std::fill_n(out.data(), width, value);
  std::copy(seq.values().begin(), seq.values().end(), out.data() + width);
  return out;
}

MaskResult apply_mask(const Tensor& seq, const MaskSpec& spec, const Tensor& mask_embedding,
                      Rng& rng) {
  if (!(spec.mask_prob >= 0.0 && spec.mask_prob <= 1.0)) {
    throw ConfigError("mask_prob must lie in [0, 1]");
  }
  if (spec.span_len < 1) throw ConfigError("span_len must be at least 1");
  const std::size_t rows = seq.rows();
  const std::size_t width = seq.cols();
  if (mask_embedding.size() != width) throw ShapeError("mask embedding width mismatch");
  MaskResult out{seq, {}};
  if (rows <= 1 || spec.mask_prob == 0.0) return out;

  const std::size_t candidates = rows - 1;
  const double expected = spec.mask_prob * static_cast<double>(candidates);
  auto starts_count = static_cast<std::size_t>(std::floor(expected + rng.uniform()));
  starts_count = std::min(starts_count, candidates);

  std::vector<std::size_t> positions(candidates);
  for (std::size_t i = 0; i < candidates; ++i) positions[i] = i + 1;
  // Partial Fisher-Yates: the first `starts_count` entries are a uniform
  // sample without replacement.
  for (std::size_t i = 0; i < starts_count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates - i));
    std::swap(positions[i], positions[j]);
  }
  std::vector<bool> masked(rows, false);
  for (std::size_t i = 0; i < starts_count; ++i) {
    const std::size_t end = std::min(rows, positions[i] + spec.span_len);
    for (std::size_t p = positions[i]; p < end; ++p) masked[p] = true;
  }
  for (std::size_t p = 1; p < rows; ++p) {
    if (!masked[p]) continue;
    out.indices.push_back(p);
    std::copy(mask_embedding.values().begin(), mask_embedding.values().end(),
              out.seq.data() + p * width);
  }
  return out;
}

// ---- construction -----------------------------------------------------------

ParamStore Model::init_random(const ModelConfig& c, Rng& rng) {
  c.validate();
  ParamStore ps;
  const std::size_t d = c.model_dim;
  std::size_t in = c.in_channels;
  for (std::size_t i = 0; i < c.conv_blocks(); ++i) {
    const std::size_t k = c.conv_strides[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k));
    ps.add(conv_name(i, "weight"), uniform_tensor({c.conv_channels, in, k}, bound, rng));
    ps.add(conv_name(i, "bias"), uniform_tensor({c.conv_channels}, bound, rng));
    ps.add(conv_name(i, "gn_gamma"), Tensor({c.conv_channels}, 1.0));
    ps.add(conv_name(i, "gn_beta"), Tensor({c.conv_channels}, 0.0));
    in = c.conv_channels;
  }
  const double dbound = 1.0 / std::sqrt(static_cast<double>(d));
  ps.add("mask_embedding", uniform_tensor({d}, dbound, rng));
  const std::size_t per_group = d / c.pos_groups;
  const double pbound = 1.0 / std::sqrt(static_cast<double>(per_group * c.pos_kernel));
  ps.add("pos.weight", uniform_tensor({d, per_group, c.pos_kernel}, pbound, rng));
  ps.add("pos.bias", uniform_tensor({d}, pbound, rng));
  const double fbound = 1.0 / std::sqrt(static_cast<double>(c.ffn_dim));
  for (std::size_t l = 0; l < c.transformer_layers; ++l) {
    ps.add(layer_name(l, "ln1_gamma"), Tensor({d}, 1.0));
    ps.add(layer_name(l, "ln1_beta"), Tensor({d}, 0.0));
    ps.add(layer_name(l, "attn_wq"), uniform_tensor({d, d}, dbound, rng));
    ps.add(layer_name(l, "attn_wk"), uniform_tensor({d, d}, dbound, rng));
    ps.add(layer_name(l, "attn_wv"), uniform_tensor({d, d}, dbound, rng));
    ps.add(layer_name(l, "attn_wo"), uniform_tensor({d, d}, dbound, rng));
    ps.add(layer_name(l, "ln2_gamma"), Tensor({d}, 1.0));
    ps.add(layer_name(l, "ln2_beta"), Tensor({d}, 0.0));
    ps.add(layer_name(l, "ffn1_w"), uniform_tensor({d, c.ffn_dim}, dbound, rng));
    ps.add(layer_name(l, "ffn1_b"), uniform_tensor({c.ffn_dim}, dbound, rng));
    ps.add(layer_name(l, "ffn2_w"), uniform_tensor({c.ffn_dim, d}, fbound, rng));
    ps.add(layer_name(l, "ffn2_b"), uniform_tensor({d}, fbound, rng));
  }
  for (std::size_t j = 0; j < c.classifier_dims.size(); ++j) {
    const auto [fan_in, fan_out] = c.classifier_dims[j];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    ps.add(cls_name(j, "weight"), uniform_tensor({fan_in, fan_out}, bound, rng));
    ps.add(cls_name(j, "bias"), uniform_tensor({fan_out}, bound, rng));
  }
  return ps;
}

std::size_t Model::ref(const std::string& name) const {
  const auto& items = params_.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].name == name) return i;
  }
  throw CheckpointError("model parameter missing: " + name);
}

Model::Model(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const std::size_t d = config_.model_dim;
  auto expect = [this](std::size_t idx, const Shape& shape) {
    require_shape(v(idx), shape, params_.items()[idx].name.c_str());
    return idx;
  };
  std::size_t in = config_.in_channels;
  for (std::size_t i = 0; i < config_.conv_blocks(); ++i) {
    const std::size_t k = config_.conv_strides[i];
    conv_.push_back({expect(ref(conv_name(i, "weight")), {config_.conv_channels, in, k}),
                     expect(ref(conv_name(i, "bias")), {config_.conv_channels}),
                     expect(ref(conv_name(i, "gn_gamma")), {config_.conv_channels}),
                     expect(ref(conv_name(i, "gn_beta")), {config_.conv_channels})});
    in = config_.conv_channels;
  }
  mask_embedding_ = expect(ref("mask_embedding"), {d});
  pos_weight_ = expect(ref("pos.weight"), {d, d / config_.pos_groups, config_.pos_kernel});
  pos_bias_ = expect(ref("pos.bias"), {d});
  for (std::size_t l = 0; l < config_.transformer_layers; ++l) {
    layers_.push_back({expect(ref(layer_name(l, "ln1_gamma")), {d}),
                       expect(ref(layer_name(l, "ln1_beta")), {d}),
                       expect(ref(layer_name(l, "attn_wq")), {d, d}),
                       expect(ref(layer_name(l, "attn_wk")), {d, d}),
                       expect(ref(layer_name(l, "attn_wv")), {d, d}),
                       expect(ref(layer_name(l, "attn_wo")), {d, d}),
                       expect(ref(layer_name(l, "ln2_gamma")), {d}),
                       expect(ref(layer_name(l, "ln2_beta")), {d}),
                       expect(ref(layer_name(l, "ffn1_w")), {d, config_.ffn_dim}),
                       expect(ref(layer_name(l, "ffn1_b")), {config_.ffn_dim}),
                       expect(ref(layer_name(l, "ffn2_w")), {config_.ffn_dim, d}),
                       expect(ref(layer_name(l, "ffn2_b")), {d})});
  }
  for (std::size_t j = 0; j < config_.classifier_dims.size(); ++j) {
    const auto [fan_in, fan_out] = config_.classifier_dims[j];
    classifier_.push_back({expect(ref(cls_name(j, "weight")), {fan_in, fan_out}),
                           expect(ref(cls_name(j, "bias")), {fan_out})});
  }
}

void Model::set_trainable(FreezePolicy policy) {
  for (auto& p : params_.items()) {
    p.trainable = true;
    if (policy == FreezePolicy::FreezeConv && is_conv_param(p.name)) p.trainable = false;
    if (policy == FreezePolicy::FreezeTransformer &&
        (is_conv_param(p.name) || is_encoder_param(p.name))) {
      p.trainable = false;
    }
  }
}

bool Model::conv_trainable() const {
  return std::any_of(params_.items().begin(), params_.items().end(),
                     [](const Param& p) { return p.trainable && is_conv_param(p.name); });
}

bool Model::encoder_trainable() const {
  return std::any_of(params_.items().begin(), params_.items().end(),
                     [](const Param& p) { return p.trainable && is_encoder_param(p.name); });
}

// ---- conv encoder -----------------------------------------------------------

Tensor Model::encode(const Tensor& window, bool train, Rng& rng, EncodeTrace* trace) const {
  if (window.rank() != 2 || window.dim(0) != config_.in_channels) {
    throw ShapeError("encode: expected " + std::to_string(config_.in_channels) +
                     " x T window, got " + shape_string(window.shape()));
  }
  if (trace) trace->blocks.assign(conv_.size(), ConvBlockTrace{});
  Tensor x = window;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const std::size_t s = config_.conv_strides[i];
    if (x.dim(1) < s) {
      throw ShapeError("encode: window of " + std::to_string(window.dim(1)) +
                       " samples is shorter than the conv stage receptive field");
    }
    Tensor z = conv1d(x, v(conv_[i].weight), v(conv_[i].bias), Conv1dOptions{s, 0, 1});
    ConvBlockTrace* t = trace ? &trace->blocks[i] : nullptr;
    z = dropout(z, config_.dropout_p, train, rng, t ? &t->drop : nullptr);
    Tensor n = group_norm(z, config_.norm_groups, v(conv_[i].gamma), v(conv_[i].beta),
                          t ? &t->norm : nullptr);
    Tensor next = gelu(n);
    if (t) {
      t->input = std::move(x);
      t->normed = std::move(n);
    }
    x = std::move(next);
  }
  return x.transposed();
}

void Model::encode_backward(const EncodeTrace& trace, const Tensor& grad_seq) {
  Tensor dx = grad_seq.transposed();
  for (std::size_t i = conv_.size(); i-- > 0;) {
    const ConvBlockTrace& t = trace.blocks[i];
    const std::size_t s = config_.conv_strides[i];
    Tensor dn = gelu_backward(t.normed, dx);
    AffineNormGrads ng = group_norm_backward(dn, config_.norm_groups, v(conv_[i].gamma), t.norm);
    add_into(g(conv_[i].gamma), ng.gamma);
    add_into(g(conv_[i].beta), ng.beta);
    Tensor dz = dropout_backward(ng.input, t.drop);
    Conv1dGrads cg = conv1d_backward(t.input, v(conv_[i].weight), dz, Conv1dOptions{s, 0, 1}, i > 0);
    add_into(g(conv_[i].weight), cg.weight);
    add_into(g(conv_[i].bias), cg.bias);
    dx = std::move(cg.input);
  }
}

// ---- transformer ------------------------------------------------------------

Tensor Model::transformer_forward(const Tensor& seq, bool train, Rng& rng,
                                  TransformerTrace* trace) const {
  const std::size_t d = config_.model_dim;
  if (seq.rank() != 2 || seq.dim(1) != d) {
    throw ShapeError("transformer: expected S x " + std::to_string(d) + " input, got " +
                     shape_string(seq.shape()));
  }
  const Conv1dOptions pos_opt{1, config_.pos_kernel / 2, config_.pos_groups};
  Tensor pos_input = seq.transposed();
  Tensor pos_pre = conv1d(pos_input, v(pos_weight_), v(pos_bias_), pos_opt);
  Tensor h = seq;
  h += gelu(pos_pre).transposed();
  if (trace) {
    trace->input = seq;
    trace->pos_input = std::move(pos_input);
    trace->pos_pre = std::move(pos_pre);
    trace->layers.assign(layers_.size(), LayerTrace{});
  }

  const double p = config_.dropout_p;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerRefs& r = layers_[l];
    LayerTrace* t = trace ? &trace->layers[l] : nullptr;
    Tensor a = layer_norm(h, v(r.ln1_gamma), v(r.ln1_beta), t ? &t->ln1 : nullptr);
    Tensor m = multi_head_attention(a, config_.heads, v(r.wq), v(r.wk), v(r.wv), v(r.wo),
                                    t ? &t->attn : nullptr);
    m = dropout(m, p, train, rng, t ? &t->drop_attn : nullptr);
    h += m;
    Tensor f = layer_norm(h, v(r.ln2_gamma), v(r.ln2_beta), t ? &t->ln2 : nullptr);
    Tensor pre = linear(f, v(r.ffn1_w), v(r.ffn1_b));
    Tensor act = gelu(pre);
    Tensor o = linear(act, v(r.ffn2_w), v(r.ffn2_b));
    o = dropout(o, p, train, rng, t ? &t->drop_ffn : nullptr);
    h += o;
    if (t) {
      t->ln2_out = std::move(f);
      t->ffn_pre = std::move(pre);
      t->ffn_act = std::move(act);
    }
  }
  return h;
}

Tensor Model::transformer_backward(const TransformerTrace& trace, const Tensor& grad_out,
                                   bool accumulate) {
  Tensor dh = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerRefs& r = layers_[l];
    const LayerTrace& t = trace.layers[l];
    Tensor dout = dropout_backward(dh, t.drop_ffn);
    LinearGrads l2 = linear_backward(t.ffn_act, v(r.ffn2_w), dout);
    Tensor dpre = gelu_backward(t.ffn_pre, l2.input);
    LinearGrads l1 = linear_backward(t.ln2_out, v(r.ffn1_w), dpre);
    AffineNormGrads n2 = layer_norm_backward(l1.input, v(r.ln2_gamma), t.ln2);
    dh += n2.input;  // now gradient w.r.t. the mid-block residual
    Tensor dm = dropout_backward(dh, t.drop_attn);
    AttentionGrads ag =
        multi_head_attention_backward(dm, v(r.wq), v(r.wk), v(r.wv), v(r.wo), t.attn);
    AffineNormGrads n1 = layer_norm_backward(ag.input, v(r.ln1_gamma), t.ln1);
    if (accumulate) {
      add_into(g(r.ffn2_w), l2.weight);
      add_into(g(r.ffn2_b), l2.bias);
      add_into(g(r.ffn1_w), l1.weight);
      add_into(g(r.ffn1_b), l1.bias);
      add_into(g(r.ln2_gamma), n2.gamma);
      add_into(g(r.ln2_beta), n2.beta);
      add_into(g(r.wq), ag.wq);
      add_into(g(r.wk), ag.wk);
      add_into(g(r.wv), ag.wv);
      add_into(g(r.wo), ag.wo);
      add_into(g(r.ln1_gamma), n1.gamma);
      add_into(g(r.ln1_beta), n1.beta);
    }
    dh += n1.input;
  }

  // h0 = seq + gelu(conv(seqᵀ))ᵀ
  const Conv1dOptions pos_opt{1, config_.pos_kernel / 2, config_.pos_groups};
  Tensor dpos = gelu_backward(trace.pos_pre, dh.transposed());
  Conv1dGrads pg = conv1d_backward(trace.pos_input, v(pos_weight_), dpos, pos_opt, true);
  if (accumulate) {
    add_into(g(pos_weight_), pg.weight);
    add_into(g(pos_bias_), pg.bias);
  }
  dh += pg.input.transposed();
  return dh;
}

// ---- classifier -------------------------------------------------------------

Tensor Model::classify(const Tensor& context, bool train, Rng& rng, ClassifierTrace* trace) const {
  if (context.rank() != 2 || context.dim(0) == 0 || context.dim(1) != config_.model_dim) {
    throw ShapeError("classify: expected a non-empty S x " + std::to_string(config_.model_dim) +
                     " sequence");
  }
  const std::size_t n = classifier_.size();
  Tensor x({1, config_.model_dim});
  std::copy_n(context.data(), config_.model_dim, x.data());
  if (trace) {
    trace->inputs.assign(n, Tensor());
    trace->pre.assign(n, Tensor());
    trace->drops.assign(n, DropoutMask{});
    trace->seq_len = context.dim(0);
    trace->width = context.dim(1);
  }
  Tensor probs;
  for (std::size_t j = 0; j < n; ++j) {
    Tensor y = linear(x, v(classifier_[j].weight), v(classifier_[j].bias));
    if (trace) {
      trace->inputs[j] = x;
      trace->pre[j] = y;
    }
    if (j + 1 == n) {
      probs = softmax(y);
      break;
    }
    x = gelu(y);
    if (j + 2 < n) x = dropout(x, config_.dropout_p, train, rng, trace ? &trace->drops[j] : nullptr);
  }
  if (trace) trace->probs = probs;
  return probs;
}

Tensor Model::classify_backward(const ClassifierTrace& trace, const Tensor& grad_probs) {
  Tensor dy = softmax_backward(trace.probs, grad_probs);
  Tensor dx;
  for (std::size_t j = classifier_.size(); j-- > 0;) {
    LinearGrads lg = linear_backward(trace.inputs[j], v(classifier_[j].weight), dy);
    add_into(g(classifier_[j].weight), lg.weight);
    add_into(g(classifier_[j].bias), lg.bias);
    dx = std::move(lg.input);
    if (j > 0) {
      Tensor dact = dropout_backward(dx, trace.drops[j - 1]);
      dy = gelu_backward(trace.pre[j - 1], dact);
    }
  }
  Tensor dctx({trace.seq_len, trace.width});
  std::copy_n(dx.data(), trace.width, dctx.data());
  return dctx;
}

// ---- end to end -------------------------------------------------------------

Tensor Model::forward_classify(const Tensor& window, bool train, Rng& rng,
                               ClassifyTrace* trace) const {
  Tensor seq = encode(window, train, rng, trace ? &trace->encode : nullptr);
  Tensor tokens = prepend_special_token(seq, config_.special_token_value);
  Tensor ctx = transformer_forward(tokens, train, rng, trace ? &trace->transformer : nullptr);
  return classify(ctx, train, rng, trace ? &trace->classifier : nullptr);
}

void Model::backward_classify(const ClassifyTrace& trace, const Tensor& grad_probs) {
  Tensor dctx = classify_backward(trace.classifier, grad_probs);
  const bool conv = conv_trainable();
  const bool enc = encoder_trainable();
  if (!conv && !enc) return;
  Tensor dtokens = transformer_backward(trace.transformer, dctx, enc);
  if (!conv) return;
  const std::size_t d = config_.model_dim;
  Tensor dseq({dtokens.dim(0) - 1, d});
  std::copy(dtokens.data() + d, dtokens.data() + dtokens.size(), dseq.data());
  encode_backward(trace.encode, dseq);
}

Model::PretrainStats Model::pretrain_step(const Tensor& window, const MaskSpec& mask,
                                          const ContrastiveSpec& contrastive, bool train,
                                          Rng& rng, bool backward) {
  EncodeTrace et;
  TransformerTrace tt;
  Tensor seq = encode(window, train, rng, backward ? &et : nullptr);
  Tensor tokens = prepend_special_token(seq, config_.special_token_value);
  MaskResult mr = apply_mask(tokens, mask, v(mask_embedding_), rng);
  PretrainStats stats;
  if (mr.indices.empty()) return stats;
  Tensor ctx = transformer_forward(mr.seq, train, rng, backward ? &tt : nullptr);
  ContrastiveResult cr = contrastive_loss(ctx, tokens, mr.indices, contrastive, rng);
  stats.loss = cr.loss;
  stats.masked = mr.indices.size();
  stats.target_similarity = cr.mean_target_similarity;
  stats.distractor_similarity = cr.mean_distractor_similarity;
  if (!backward) return stats;

  const std::size_t d = config_.model_dim;
  Tensor din = transformer_backward(tt, cr.grad_context, encoder_trainable());
  Tensor& gm = g(mask_embedding_);
  for (std::size_t r : mr.indices) {
    for (std::size_t c = 0; c < d; ++c) {
      gm[c] += din.at(r, c);
      din.at(r, c) = 0.0;
    }
  }
  if (!conv_trainable()) return stats;
  din += cr.grad_targets;
  Tensor dseq({din.dim(0) - 1, d});
  std::copy(din.data() + d, din.data() + din.size(), dseq.data());
  encode_backward(et, dseq);
  return stats;
}

Tensor Model::predict(const Tensor& window) const {
  Rng unused(0);
  return forward_classify(window, false, unused, nullptr);
}

// ---- initialisation policies ------------------------------------------------

ParamStore init_weights(const ModelConfig& config, InitPolicy policy, const ParamStore* source,
                        Rng& rng) {
  ParamStore target = Model::init_random(config, rng);
  if (policy == InitPolicy::Random) return target;
  if (!source) throw CheckpointError(to_string(policy) + " initialisation requires a source checkpoint");

  auto copy_if_present = [&](Param& dst, const std::string& src_name) {
    if (!source->contains(src_name)) return false;
    const Tensor& src = source->value(src_name);
    if (src.shape() != dst.value.shape()) {
      throw CheckpointError("incompatible shapes for " + dst.name + ": source " +
                            shape_string(src.shape()) + " vs target " +
                            shape_string(dst.value.shape()));
    }
    dst.value = src;
    return true;
  };

  std::size_t source_layers = 0;
  while (source->contains(layer_name(source_layers, "attn_wq"))) ++source_layers;
  if (policy == InitPolicy::LoadDuplicate) {
    if (source_layers == 0) throw CheckpointError("source checkpoint has no transformer layers");
    if (config.transformer_layers < source_layers) {
      throw CheckpointError("duplicate initialisation needs at least as many target layers (" +
                            std::to_string(config.transformer_layers) + ") as source layers (" +
                            std::to_string(source_layers) + ")");
    }
  }

  for (Param& p : target.items()) {
    if (copy_if_present(p, p.name)) continue;
    if (policy != InitPolicy::LoadDuplicate || !p.name.starts_with("layer.")) continue;
    // layer.{l}.leaf -> layer.{(l - Ls) mod Ls}.leaf
    const auto dot = p.name.find('.', 6);
    const std::size_t l = std::stoul(p.name.substr(6, dot - 6));
    const std::size_t src_layer = (l - source_layers) % source_layers;
    copy_if_present(p, "layer." + std::to_string(src_layer) + p.name.substr(dot));
  }
  return target;
}

}  // namespace bendr
