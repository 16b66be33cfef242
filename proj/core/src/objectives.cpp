#include "bendr/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

void ContrastiveSpec::validate() const {
  if (num_distractors < 1) throw ConfigError("contrastive loss needs at least one distractor");
  if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
}

void to_json(nlohmann::json& j, const ContrastiveSpec& s) {
  j = nlohmann::json{{"num_distractors", s.num_distractors}, {"temperature", s.temperature}};
}

void from_json(const nlohmann::json& j, ContrastiveSpec& s) {
  ContrastiveSpec d;
  s.num_distractors = j.value("num_distractors", d.num_distractors);
  s.temperature = j.value("temperature", d.temperature);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv) + kCosineEps);
}

namespace {

// Adds w·∂cos(u,v)/∂u to du and w·∂cos(u,v)/∂v to dv.
void cosine_backward(std::span<const double> u, std::span<const double> v, double w,
                     std::span<double> du, std::span<double> dv) {
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu2 += u[i] * u[i];
    nv2 += v[i] * v[i];
  }
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  const double denom = nu * nv + kCosineEps;
  const double c = dot / (denom * denom);
  const double gu = nu > 0.0 ? c * nv / nu : 0.0;  // coefficient on u from ∂‖u‖
  const double gv = nv > 0.0 ? c * nu / nv : 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    du[i] += w * (v[i] / denom - gu * u[i]);
    dv[i] += w * (u[i] / denom - gv * v[i]);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> sample_distractors(std::size_t rows,
                                                         const std::vector<std::size_t>& masked,
                                                         std::size_t num_distractors, Rng& rng) {
  if (rows < 3) throw ShapeError("contrastive loss needs at least two non-special rows");
  std::vector<std::vector<std::size_t>> out;
  out.reserve(masked.size());
  const std::size_t pool = rows - 2;  // rows 1..S−1 minus the target
  for (std::size_t i : masked) {
    std::vector<std::size_t> d(num_distractors);
    for (auto& idx : d) {
      std::size_t r = 1 + static_cast<std::size_t>(rng.below(pool));
      if (r >= i) ++r;
      idx = r;
    }
    out.push_back(std::move(d));
  }
  return out;
}

ContrastiveResult contrastive_loss(const Tensor& context, const Tensor& targets,
                                   const std::vector<std::size_t>& masked,
                                   const std::vector<std::vector<std::size_t>>& distractors,
                                   double temperature) {
  if (context.shape() != targets.shape() || context.rank() != 2) {
    throw ShapeError("contrastive loss: context and target sequences must share an S x D shape");
  }
  if (masked.empty()) throw ShapeError("contrastive loss: no masked positions");
  if (distractors.size() != masked.size()) throw ShapeError("contrastive loss: distractor table size");
  if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");

  ContrastiveResult res;
  res.grad_context = Tensor(context.shape());
  res.grad_targets = Tensor(targets.shape());
  const double inv_n = 1.0 / static_cast<double>(masked.size());
  std::size_t distractor_count = 0;

  for (std::size_t m = 0; m < masked.size(); ++m) {
    const std::size_t i = masked[m];
    if (i == 0 || i >= context.rows()) throw ShapeError("contrastive loss: masked index out of range");
    const auto& cand = distractors[m];
    std::vector<std::size_t> rows{i};
    rows.insert(rows.end(), cand.begin(), cand.end());

    std::vector<double> logits(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double cs = cosine_similarity(context.row(i), targets.row(rows[k]));
      logits[k] = cs / temperature;
      if (k == 0) {
        res.mean_target_similarity += cs;
      } else {
        res.mean_distractor_similarity += cs;
        ++distractor_count;
      }
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    res.loss += inv_n * (mx + std::log(z) - logits[0]);

    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double soft = std::exp(logits[k] - mx) / z;
      const double dlogit = inv_n * (soft - (k == 0 ? 1.0 : 0.0));
      cosine_backward(context.row(i), targets.row(rows[k]), dlogit / temperature,
                      res.grad_context.row(i), res.grad_targets.row(rows[k]));
    }
  }
  res.mean_target_similarity /= static_cast<double>(masked.size());
  if (distractor_count) res.mean_distractor_similarity /= static_cast<double>(distractor_count);
  return res;
}

ContrastiveResult contrastive_loss(const Tensor& context, const Tensor& targets,
                                   const std::vector<std::size_t>& masked,
                                   const ContrastiveSpec& spec, Rng& rng) {
  spec.validate();
  auto distractors = sample_distractors(context.rows(), masked, spec.num_distractors, rng);
  return contrastive_loss(context, targets, masked, distractors, spec.temperature);
}

void SswceSpec::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("SSWCE weights must be non-negative");
  if (std::abs(alpha + beta - 1.0) > 1e-9) throw ConfigError("SSWCE weights must sum to 1");
}

void to_json(nlohmann::json& j, const SswceSpec& s) {
  j = nlohmann::json{{"alpha", s.alpha}, {"beta", s.beta}};
}

void from_json(const nlohmann::json& j, SswceSpec& s) {
  SswceSpec d;
  s.alpha = j.value("alpha", d.alpha);
  s.beta = j.value("beta", d.beta);
}

double sswce_sample_weight(int label, std::size_t positives, std::size_t negatives,
                           const SswceSpec& spec) {
  if (label == 1) return positives ? spec.alpha / static_cast<double>(positives) : 0.0;
  return negatives ? spec.beta / static_cast<double>(negatives) : 0.0;
}

SswceResult sswce_loss(const Tensor& probs, const std::vector<int>& labels, const SswceSpec& spec) {
  spec.validate();
  if (probs.rank() != 2 || probs.dim(1) != 2) throw ShapeError("SSWCE expects batch x 2 probabilities");
  if (probs.dim(0) != labels.size()) throw ShapeError("SSWCE: one label per row required");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ShapeError("SSWCE labels must be 0 or 1");
    (y == 1 ? pos : neg)++;
  }
  SswceResult res;
  res.grad_probs = Tensor(probs.shape());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    const double w = sswce_sample_weight(y, pos, neg, spec);
    const double p = probs.at(r, static_cast<std::size_t>(y));
    res.loss += w * -std::log(std::max(p, kProbClamp));
    res.grad_probs.at(r, static_cast<std::size_t>(y)) = p > kProbClamp ? -w / p : 0.0;
  }
  return res;
}

}  // namespace bendr
