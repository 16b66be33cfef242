#include "grad_cases.hpp"

#include <cmath>

#include "bendr/model.hpp"
#include "bendr/objectives.hpp"
#include "bendr/ops.hpp"
#include "bendr/rng.hpp"

namespace bendr::testing {

Tensor random_tensor(Shape shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Σ r⊙y: a random linear read-out so every output element matters.
double project(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

GradProblem conv1d_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t groups = pick(rng, 1, 2);
  const std::size_t cin = groups * pick(rng, 1, 3);
  const std::size_t cout = groups * pick(rng, 1, 3);
  const std::size_t k = pick(rng, 1, 5);
  const std::size_t stride = pick(rng, 1, 3);
  const std::size_t pad = pick(rng, 0, 2);
  const std::size_t len = k + pick(rng, 3, 30);
  const Conv1dOptions opt{stride, pad, groups};
  const std::size_t out_len = conv1d_output_length(len, k, opt);
  Tensor r = random_tensor({cout, out_len}, rng);
  GradProblem p;
  p.inputs = {random_tensor({cin, len}, rng), random_tensor({cout, cin / groups, k}, rng),
              random_tensor({cout}, rng)};
  p.f = [r, opt](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Tensor y = conv1d(in[0], in[1], in[2], opt);
    if (g) {
      Conv1dGrads cg = conv1d_backward(in[0], in[1], r, opt, true);
      *g = {cg.input, cg.weight, cg.bias};
    }
    return project(y, r);
  };
  return p;
}

GradProblem group_norm_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t groups = pick(rng, 1, 3);
  const std::size_t c = groups * pick(rng, 1, 3);
  const std::size_t len = pick(rng, 2, 12);
  Tensor r = random_tensor({c, len}, rng);
  GradProblem p;
  p.inputs = {random_tensor({c, len}, rng, 2.0), random_tensor({c}, rng), random_tensor({c}, rng)};
  p.f = [r, groups](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    NormCache cache;
    Tensor y = group_norm(in[0], groups, in[1], in[2], &cache);
    if (g) {
      AffineNormGrads ng = group_norm_backward(r, groups, in[1], cache);
      *g = {ng.input, ng.gamma, ng.beta};
    }
    return project(y, r);
  };
  return p;
}

GradProblem layer_norm_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 6);
  const std::size_t d = pick(rng, 2, 12);
  Tensor r = random_tensor({n, d}, rng);
  GradProblem p;
  p.inputs = {random_tensor({n, d}, rng, 2.0), random_tensor({d}, rng), random_tensor({d}, rng)};
  p.f = [r](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    NormCache cache;
    Tensor y = layer_norm(in[0], in[1], in[2], &cache);
    if (g) {
      AffineNormGrads ng = layer_norm_backward(r, in[1], cache);
      *g = {ng.input, ng.gamma, ng.beta};
    }
    return project(y, r);
  };
  return p;
}

GradProblem linear_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 6);
  const std::size_t din = pick(rng, 1, 8);
  const std::size_t dout = pick(rng, 1, 8);
  Tensor r = random_tensor({n, dout}, rng);
  GradProblem p;
  p.inputs = {random_tensor({n, din}, rng), random_tensor({din, dout}, rng), random_tensor({dout}, rng)};
  p.f = [r](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Tensor y = linear(in[0], in[1], in[2]);
    if (g) {
      LinearGrads lg = linear_backward(in[0], in[1], r);
      *g = {lg.input, lg.weight, lg.bias};
    }
    return project(y, r);
  };
  return p;
}

GradProblem gelu_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 40);
  Tensor r = random_tensor({n}, rng);
  GradProblem p;
  p.inputs = {random_tensor({n}, rng, 4.0)};
  p.f = [r](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Tensor y = gelu(in[0]);
    if (g) *g = {gelu_backward(in[0], r)};
    return project(y, r);
  };
  return p;
}

GradProblem softmax_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 5);
  const std::size_t d = pick(rng, 1, 8);
  Tensor r = random_tensor({n, d}, rng);
  GradProblem p;
  p.inputs = {random_tensor({n, d}, rng, 3.0)};
  p.f = [r](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Tensor y = softmax(in[0]);
    if (g) *g = {softmax_backward(y, r)};
    return project(y, r);
  };
  return p;
}

GradProblem dropout_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 40);
  const double prob = rng.uniform(0.1, 0.7);
  Tensor r = random_tensor({n}, rng);
  const Rng mask_rng = rng.derive("mask");
  GradProblem p;
  p.inputs = {random_tensor({n}, rng)};
  p.f = [r, prob, mask_rng](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Rng local = mask_rng;
    DropoutMask mask;
    Tensor y = dropout(in[0], prob, true, local, &mask);
    if (g) *g = {dropout_backward(r, mask)};
    return project(y, r);
  };
  return p;
}

GradProblem attention_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t heads = pick(rng, 1, 3);
  const std::size_t d = heads * pick(rng, 1, 4);
  const std::size_t s = pick(rng, 1, 7);
  Tensor r = random_tensor({s, d}, rng);
  GradProblem p;
  p.inputs = {random_tensor({s, d}, rng), random_tensor({d, d}, rng), random_tensor({d, d}, rng),
              random_tensor({d, d}, rng), random_tensor({d, d}, rng)};
  p.f = [r, heads](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    AttentionCache cache;
    Tensor y = multi_head_attention(in[0], heads, in[1], in[2], in[3], in[4], &cache);
    if (g) {
      AttentionGrads ag = multi_head_attention_backward(r, in[1], in[2], in[3], in[4], cache);
      *g = {ag.input, ag.wq, ag.wk, ag.wv, ag.wo};
    }
    return project(y, r);
  };
  return p;
}

GradProblem contrastive_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t s = pick(rng, 4, 9);
  const std::size_t d = pick(rng, 2, 16);
  const std::size_t k = pick(rng, 1, 4);
  const double temperature = rng.uniform(0.1, 1.0);
  std::vector<std::size_t> masked;
  for (std::size_t i = 1; i < s; ++i) {
    if (rng.uniform() < 0.5) masked.push_back(i);
  }
  if (masked.empty()) masked.push_back(1);
  const auto table = sample_distractors(s, masked, k, rng);
  GradProblem p;
  p.inputs = {random_tensor({s, d}, rng), random_tensor({s, d}, rng)};
  p.f = [masked, table, temperature](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    ContrastiveResult res = contrastive_loss(in[0], in[1], masked, table, temperature);
    if (g) *g = {res.grad_context, res.grad_targets};
    return res.loss;
  };
  return p;
}

// Logits → softmax → SSWCE, the path the classifier uses.
GradProblem sswce_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 8);
  std::vector<int> labels(n);
  for (int& y : labels) y = rng.uniform() < 0.4 ? 1 : 0;
  SswceSpec spec;
  spec.alpha = rng.uniform(0.0, 1.0);
  spec.beta = 1.0 - spec.alpha;
  GradProblem p;
  p.inputs = {random_tensor({n, 2}, rng, 3.0)};
  p.f = [labels, spec](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    Tensor probs = softmax(in[0]);
    SswceResult res = sswce_loss(probs, labels, spec);
    if (g) *g = {softmax_backward(probs, res.grad_probs)};
    return res.loss;
  };
  return p;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.in_channels = 2;
  c.conv_channels = 16;
  c.model_dim = 16;
  c.conv_strides = {3, 2, 2};
  c.norm_groups = 4;
  c.transformer_layers = 2;
  c.heads = 2;
  c.ffn_dim = 32;
  c.pos_kernel = 5;
  c.pos_groups = 4;
  c.dropout_p = 0.1;
  c.classifier_dims = {{16, 8}, {8, 4}, {4, 2}};
  return c;
}

}  // namespace

GradProblem model_sswce_problem(std::uint64_t seed) {
  const ModelConfig config = tiny_config();
  Rng rng(seed);
  ParamStore params = Model::init_random(config, rng);
  // S = 72 → 24 → 12 → 6 tokens.
  std::vector<Tensor> windows{random_tensor({2, 72}, rng), random_tensor({2, 72}, rng)};
  const std::vector<int> labels{1, 0};
  const Rng drop_rng = rng.derive("dropout");
  GradProblem p;
  for (const auto& prm : params.items()) p.inputs.push_back(prm.value);
  p.f = [config, params, windows, labels, drop_rng](const std::vector<Tensor>& in,
                                                    std::vector<Tensor>* g) {
    ParamStore ps = params;
    for (std::size_t i = 0; i < in.size(); ++i) ps.items()[i].value = in[i];
    ps.zero_grad();
    Model model(config, std::move(ps));
    Rng local = drop_rng;
    const SswceSpec spec;
    double loss = 0.0;
    for (std::size_t n = 0; n < windows.size(); ++n) {
      Model::ClassifyTrace trace;
      Tensor probs = model.forward_classify(windows[n], true, local, &trace);
      const double w = sswce_sample_weight(labels[n], 1, 1, spec);
      const auto y = static_cast<std::size_t>(labels[n]);
      loss += -w * std::log(probs[y]);
      if (g) {
        Tensor grad({1, 2});
        grad[y] = -w / probs[y];
        model.backward_classify(trace, grad);
      }
    }
    if (g) {
      g->clear();
      for (const auto& prm : model.params().items()) g->push_back(prm.grad);
    }
    return loss;
  };
  return p;
}

const std::vector<GradCase>& gradient_cases() {
  static const std::vector<GradCase> cases = {
      {"conv1d", 1e-4, conv1d_case},
      {"group_norm", 1e-4, group_norm_case},
      {"layer_norm", 1e-4, layer_norm_case},
      {"linear", 1e-4, linear_case},
      {"gelu", 1e-6, gelu_case},
      {"softmax", 1e-6, softmax_case},
      {"dropout", 1e-6, dropout_case},
      {"multi_head_attention", 1e-4, attention_case},
      {"contrastive_loss", 1e-4, contrastive_case},
      {"sswce_loss", 1e-6, sswce_case},
      {"model_sswce", 1e-4, model_sswce_problem},
  };
  return cases;
}

}  // namespace bendr::testing
