#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "bendr/rng.hpp"
#include "bendr/tensor.hpp"

namespace bendr {

struct ContrastiveSpec {
  std::size_t num_distractors = 20;
  double temperature = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ContrastiveSpec& s);
void from_json(const nlohmann::json& j, ContrastiveSpec& s);

inline constexpr double kCosineEps = 1e-8;

// u·v / (‖u‖‖v‖ + ε)
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct ContrastiveResult {
  double loss = 0.0;
  Tensor grad_context;  // same shape as the contextual sequence
  Tensor grad_targets;  // same shape as the target sequence
  double mean_target_similarity = 0.0;
  double mean_distractor_similarity = 0.0;
};

// Mean over masked rows i of −log softmax over {b_i} ∪ distractors of
// cos(c_i, ·)/κ, with the true target at candidate index 0. Row 0 (the
// special token) is never a target nor a distractor.
ContrastiveResult contrastive_loss(const Tensor& context, const Tensor& targets,
                                   const std::vector<std::size_t>& masked,
                                   const std::vector<std::vector<std::size_t>>& distractors,
                                   double temperature);

// Draws `num_distractors` candidates per masked row uniformly (with
// replacement) from rows 1..S−1 other than the row itself.
std::vector<std::vector<std::size_t>> sample_distractors(std::size_t rows,
                                                         const std::vector<std::size_t>& masked,
                                                         std::size_t num_distractors, Rng& rng);

ContrastiveResult contrastive_loss(const Tensor& context, const Tensor& targets,
                                   const std::vector<std::size_t>& masked,
                                   const ContrastiveSpec& spec, Rng& rng);

// Sensitivity/specificity weighted cross-entropy.
struct SswceSpec {
  double alpha = 0.8;  // weight of the positive-class term
  double beta = 0.2;   // weight of the negative-class term

  void validate() const;
};

void to_json(nlohmann::json& j, const SswceSpec& s);
void from_json(const nlohmann::json& j, SswceSpec& s);

inline constexpr double kProbClamp = 1e-12;

struct SswceResult {
  double loss = 0.0;
  Tensor grad_probs;  // batch×2
};

// L = α·mean_{y=1}(−ln p₁) + β·mean_{y=0}(−ln p₀); an empty class contributes 0.
SswceResult sswce_loss(const Tensor& probs, const std::vector<int>& labels, const SswceSpec& spec);

// Coefficient multiplying −ln p_y for one sample of a batch with the given
// class counts, so that summing per-sample terms reproduces sswce_loss.
double sswce_sample_weight(int label, std::size_t positives, std::size_t negatives,
                           const SswceSpec& spec);

}  // namespace bendr
