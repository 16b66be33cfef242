#include <gtest/gtest.h>

#include <cmath>

#include "bendr/errors.hpp"
#include "bendr/grad_check.hpp"
#include "bendr/objectives.hpp"
#include "bendr/ops.hpp"
#include "grad_cases.hpp"

namespace bendr {
namespace {

using testing::random_tensor;

Tensor one_hot_rows(std::size_t rows, std::size_t width) {
  Tensor t({rows, width});
  for (std::size_t i = 0; i < rows; ++i) t.at(i, i) = 1.0;
  return t;
}

TEST(contrastive_loss, aligned_target_with_orthogonal_distractors) {
  const Tensor b = one_hot_rows(22, 32);
  const Tensor c = b;
  std::vector<std::size_t> distractors;
  for (std::size_t i = 2; i < 22; ++i) distractors.push_back(i);
  const ContrastiveResult r = contrastive_loss(c, b, {1}, {distractors}, 0.1);
  const double expected = -std::log(std::exp(10.0) / (std::exp(10.0) + 20.0));
  EXPECT_NEAR(expected, 9.0759e-4, 1e-7);
  EXPECT_NEAR(r.loss, expected, 1e-9);
  EXPECT_NEAR(r.mean_target_similarity, 1.0, 1e-7);
  EXPECT_NEAR(r.mean_distractor_similarity, 0.0, 1e-15);
}

TEST(contrastive_loss, equal_similarities_give_log_k_plus_one) {
  Rng rng(1);
  const Tensor b = random_tensor({8, 4}, rng);
  const Tensor c({8, 4}, 0.0);
  const std::vector<std::vector<std::size_t>> table{{2, 3, 4}, {1, 5, 6}};
  const ContrastiveResult r = contrastive_loss(c, b, {1, 2}, table, 0.1);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(contrastive_loss, finite_difference_s8_d16_k3) {
  Rng rng(2);
  const std::vector<std::size_t> masked{2, 3, 6};
  const auto table = sample_distractors(8, masked, 3, rng);
  GradClosure f = [&](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const ContrastiveResult r = contrastive_loss(in[0], in[1], masked, table, 0.1);
    if (g) *g = {r.grad_context, r.grad_targets};
    return r.loss;
  };
  const GradCheckReport rep =
      grad_check(f, {random_tensor({8, 16}, rng), random_tensor({8, 16}, rng)}, 1e-4, 1e-4);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(contrastive_loss, zero_norm_vectors_are_guarded) {
  const ContrastiveResult r = contrastive_loss(Tensor({4, 3}), Tensor({4, 3}), {1}, {{2, 3}}, 0.1);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-12);
}

TEST(contrastive_loss, invalid_inputs) {
  const Tensor t({4, 3}, 1.0);
  EXPECT_THROW(contrastive_loss(t, t, {}, {}, 0.1), ShapeError);
  EXPECT_THROW(contrastive_loss(t, t, {0}, {{1}}, 0.1), ShapeError);
  EXPECT_THROW(contrastive_loss(t, Tensor({5, 3}), {1}, {{2}}, 0.1), ShapeError);
}

TEST(contrastive_loss, non_negative) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const ContrastiveResult r = contrastive_loss(random_tensor({10, 6}, rng), random_tensor({10, 6}, rng),
                                                 {1, 4, 9}, ContrastiveSpec{}, rng);
    EXPECT_GE(r.loss, 0.0);
  }
}

TEST(sample_distractors, excludes_token_and_target) {
  Rng rng(4);
  const std::vector<std::size_t> masked{1, 5, 9};
  const auto table = sample_distractors(10, masked, 20, rng);
  ASSERT_EQ(table.size(), 3u);
  for (std::size_t m = 0; m < masked.size(); ++m) {
    ASSERT_EQ(table[m].size(), 20u);
    for (std::size_t d : table[m]) {
      EXPECT_NE(d, 0u);
      EXPECT_NE(d, masked[m]);
      EXPECT_LT(d, 10u);
    }
  }
}

TEST(contrastive_spec, validation) {
  ContrastiveSpec s;
  s.num_distractors = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ContrastiveSpec{};
  s.temperature = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(sswce_loss, positive_only_weights) {
  const Tensor probs = Tensor::matrix(3, 2, {0.3, 0.7, 0.6, 0.4, 0.9, 0.1});
  const SswceResult r = sswce_loss(probs, {1, 1, 0}, SswceSpec{1.0, 0.0});
  EXPECT_NEAR(r.loss, 0.5 * (-std::log(0.7) - std::log(0.4)), 1e-15);
}

TEST(sswce_loss, perfect_predictions) {
  const Tensor probs = Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0});
  EXPECT_NEAR(sswce_loss(probs, {1, 0}, SswceSpec{}).loss, 0.0, 1e-12);
}

TEST(sswce_loss, hand_evaluated_batch) {
  const Tensor probs = Tensor::matrix(2, 2, {0.3, 0.7, 0.8, 0.2});
  const SswceResult r = sswce_loss(probs, {1, 0}, SswceSpec{0.8, 0.2});
  EXPECT_NEAR(r.loss, 0.8 * -std::log(0.7) + 0.2 * -std::log(0.8), 1e-15);
  EXPECT_NEAR(r.loss, 0.32997, 1e-5);
}

TEST(sswce_loss, zero_probability_clamped) {
  const Tensor probs = Tensor::matrix(1, 2, {1.0, 0.0});
  const SswceResult r = sswce_loss(probs, {1}, SswceSpec{});
  EXPECT_NEAR(r.loss, 0.8 * -std::log(kProbClamp), 1e-9);
}

TEST(sswce_loss, logit_gradient_finite_difference) {
  Rng rng(5);
  const std::vector<int> labels{1, 0, 0, 1, 0};
  GradClosure f = [&](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const Tensor p = softmax(in[0]);
    const SswceResult r = sswce_loss(p, labels, SswceSpec{});
    if (g) *g = {softmax_backward(p, r.grad_probs)};
    return r.loss;
  };
  const GradCheckReport rep = grad_check(f, {random_tensor({5, 2}, rng, 3.0)}, 1e-4, 1e-6);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(sswce_loss, per_sample_weights_reproduce_batch_loss) {
  const Tensor probs = Tensor::matrix(4, 2, {0.3, 0.7, 0.8, 0.2, 0.5, 0.5, 0.1, 0.9});
  const std::vector<int> labels{1, 0, 0, 1};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double w = sswce_sample_weight(labels[i], 2, 2, SswceSpec{});
    sum += w * -std::log(probs.at(i, static_cast<std::size_t>(labels[i])));
  }
  EXPECT_NEAR(sum, sswce_loss(probs, labels, SswceSpec{}).loss, 1e-15);
}

TEST(sswce_spec, weights_must_sum_to_one) {
  EXPECT_THROW((SswceSpec{0.7, 0.2}.validate()), ConfigError);
  EXPECT_THROW((SswceSpec{1.2, -0.2}.validate()), ConfigError);
  EXPECT_NO_THROW((SswceSpec{0.5, 0.5}.validate()));
}

}  // namespace
}  // namespace bendr
