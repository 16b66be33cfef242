#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bendr/checkpoint.hpp"
#include "bendr/errors.hpp"
#include "bendr/grad_check.hpp"
#include "bendr/ops.hpp"
#include "bendr/preprocess.hpp"
#include "grad_cases.hpp"

namespace bendr {
namespace {

using testing::random_tensor;

TEST(conv1d, hand_sum) {
  const Tensor x = Tensor::matrix(1, 4, {1, 2, 3, 4});
  const Tensor w({1, 1, 2}, {1.0, 1.0});
  const Tensor y = conv1d(x, w, Tensor::vector({0.0}), Conv1dOptions{2, 0, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 7.0);
}

TEST(conv1d, unit_kernel_is_identity) {
  Rng rng(1);
  const Tensor x = random_tensor({1, 9}, rng);
  const Tensor y = conv1d(x, Tensor({1, 1, 1}, 1.0), Tensor{});
  EXPECT_EQ(y, x);
}

TEST(conv1d, output_length_recurrence) {
  EXPECT_EQ(conv1d_output_length(2048, 3, {3, 0, 1}), 682u);
  EXPECT_EQ(conv1d_output_length(37, 5, {1, 0, 1}), 33u);
  EXPECT_EQ(conv1d_output_length(10, 3, {2, 1, 1}), 5u);
}

TEST(conv1d, kernel_longer_than_input) {
  Rng rng(2);
  EXPECT_THROW(conv1d(random_tensor({1, 3}, rng), random_tensor({1, 1, 4}, rng), Tensor{}),
               ShapeError);
}

TEST(conv1d, finite_difference_on_fixed_shape) {
  Rng rng(3);
  const Tensor r = random_tensor({3, 33}, rng);
  GradClosure f = [&](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const Tensor y = conv1d(in[0], in[1], in[2]);
    if (g) {
      const Conv1dGrads cg = conv1d_backward(in[0], in[1], r);
      *g = {cg.input, cg.weight, cg.bias};
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };
  const GradCheckReport rep = grad_check(
      f, {random_tensor({2, 37}, rng), random_tensor({3, 2, 5}, rng), random_tensor({3}, rng)},
      1e-4, 1e-5);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(group_norm, constant_input_gives_zero) {
  const Tensor y = group_norm(Tensor({4, 6}, 3.0), 2, Tensor({4}, 1.0), Tensor({4}, 0.0));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(group_norm, per_channel_matches_meanstd) {
  Rng rng(4);
  const Tensor x = random_tensor({3, 200}, rng, 2.0);
  const Tensor a = group_norm(x, 3, Tensor({3}, 1.0), Tensor({3}, 0.0));
  const Tensor b = normalize(x, NormMode::MeanStd);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
}

TEST(group_norm, indivisible_groups) {
  EXPECT_THROW(group_norm(Tensor({5, 4}), 2, Tensor({5}, 1.0), Tensor({5})), ShapeError);
}

TEST(multi_head_attention, identical_keys_average_values) {
  Rng rng(5);
  const std::size_t s = 4, d = 6;
  const Tensor x = random_tensor({s, d}, rng);
  const Tensor wq = random_tensor({d, d}, rng), wv = random_tensor({d, d}, rng),
               wo = random_tensor({d, d}, rng);
  const Tensor wk({d, d}, 0.0);
  AttentionCache cache;
  const Tensor y = multi_head_attention(x, 2, wq, wk, wv, wo, &cache);
  for (const Tensor& p : cache.probs) {
    for (double v : p.values()) EXPECT_NEAR(v, 0.25, 1e-15);
  }
  const RowMatrix v = x.mat() * wv.mat();
  const Eigen::RowVectorXd expected = v.colwise().mean() * wo.mat();
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(y.at(r, c), expected(c), 1e-12);
  }
}

TEST(multi_head_attention, single_token) {
  Rng rng(6);
  const std::size_t d = 8;
  const Tensor x = random_tensor({1, d}, rng);
  const Tensor wq = random_tensor({d, d}, rng), wk = random_tensor({d, d}, rng),
               wv = random_tensor({d, d}, rng), wo = random_tensor({d, d}, rng);
  const Tensor y = multi_head_attention(x, 4, wq, wk, wv, wo);
  const RowMatrix expected = x.mat() * wv.mat() * wo.mat();
  for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(y[c], expected(0, c), 1e-12);
}

TEST(multi_head_attention, finite_difference_s5_d8_h2) {
  Rng rng(7);
  const std::size_t s = 5, d = 8;
  const Tensor r = random_tensor({s, d}, rng);
  GradClosure f = [&](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    AttentionCache cache;
    const Tensor y = multi_head_attention(in[0], 2, in[1], in[2], in[3], in[4], &cache);
    if (g) {
      const AttentionGrads ag = multi_head_attention_backward(r, in[1], in[2], in[3], in[4], cache);
      *g = {ag.input, ag.wq, ag.wk, ag.wv, ag.wo};
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
    return acc;
  };
  std::vector<Tensor> in{random_tensor({s, d}, rng)};
  for (int i = 0; i < 4; ++i) in.push_back(random_tensor({d, d}, rng));
  const GradCheckReport rep = grad_check(f, in, 1e-4, 1e-4);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(multi_head_attention, heads_must_divide_width) {
  const Tensor w({6, 6});
  EXPECT_THROW(multi_head_attention(Tensor({2, 6}), 4, w, w, w, w), ShapeError);
}

TEST(softmax, symmetric_pair) {
  const Tensor y = softmax(Tensor::vector({0.0, 0.0}));
  EXPECT_EQ(y[0], 0.5);
  EXPECT_EQ(y[1], 0.5);
}

TEST(softmax, rows_sum_to_one_and_positive) {
  Rng rng(8);
  const Tensor y = softmax(random_tensor({50, 7}, rng, 30.0));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double s = 0.0;
    for (double v : y.row(r)) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(softmax, empty_axis) {
  EXPECT_THROW(softmax(Tensor({3, 0})), ShapeError);
}

TEST(dropout, zero_probability_is_identity) {
  Rng rng(9), drop(10);
  const Tensor x = random_tensor({20}, rng);
  EXPECT_EQ(dropout(x, 0.0, true, drop), x);
}

TEST(dropout, eval_mode_is_identity) {
  Rng rng(11), drop(12);
  const Tensor x = random_tensor({20}, rng);
  EXPECT_EQ(dropout(x, 0.5, false, drop), x);
}

TEST(dropout, inverted_scaling) {
  Rng drop(13);
  const Tensor y = dropout(Tensor({1000}, 1.0), 0.5, true, drop);
  std::size_t kept = 0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 400u);
  EXPECT_LT(kept, 600u);
}

TEST(dropout, same_seed_same_mask) {
  Rng a(14), b(14);
  EXPECT_EQ(dropout(Tensor({64}, 1.0), 0.3, true, a), dropout(Tensor({64}, 1.0), 0.3, true, b));
}

TEST(gelu, finite_difference_at_17_points) {
  std::vector<double> pts;
  for (int i = 0; i <= 16; ++i) pts.push_back(-4.0 + 0.5 * i);
  const Tensor x({pts.size()}, pts);
  GradClosure f = [](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const Tensor y = gelu(in[0]);
    if (g) *g = {gelu_backward(in[0], Tensor(in[0].shape(), 1.0))};
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s;
  };
  const GradCheckReport rep = grad_check(f, {x}, 1e-4, 1e-6);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(gelu, known_values) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
}

TEST(layer_norm, rows_standardised) {
  Rng rng(15);
  const Tensor y = layer_norm(random_tensor({3, 32}, rng, 5.0), Tensor({32}, 1.0), Tensor({32}));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, sq = 0.0;
    for (double v : y.row(r)) mean += v;
    mean /= 32.0;
    for (double v : y.row(r)) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 32.0, 1.0, 1e-3);
  }
}

TEST(linear, matches_matrix_product) {
  const Tensor x = Tensor::matrix(1, 2, {1.0, 2.0});
  const Tensor w = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  const Tensor y = linear(x, w, Tensor::vector({0.5, -0.5}));
  EXPECT_EQ(y[0], 7.5);
  EXPECT_EQ(y[1], 9.5);
}

TEST(grad_check, linear_sum_closure_is_tight) {
  Rng rng(16);
  GradClosure f = [](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const Tensor y = linear(in[0], in[1], in[2]);
    if (g) {
      const LinearGrads lg = linear_backward(in[0], in[1], Tensor(y.shape(), 1.0));
      *g = {lg.input, lg.weight, lg.bias};
    }
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s;
  };
  const GradCheckReport rep = grad_check(
      f, {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)}, 1e-4,
      1e-7);
  ASSERT_EQ(rep.entries.size(), 3u);
  EXPECT_LT(rep.max_rel_error(), 1e-7);
}

TEST(grad_check, no_inputs_gives_empty_report) {
  GradClosure f = [](const std::vector<Tensor>&, std::vector<Tensor>*) { return 1.0; };
  const GradCheckReport rep = grad_check(f, {}, 1e-4, 1e-4);
  EXPECT_TRUE(rep.entries.empty());
}

TEST(grad_check, corrupted_gradient_is_caught) {
  Rng rng(17);
  GradClosure f = [](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    const Tensor y = gelu(in[0]);
    if (g) {
      Tensor grad = gelu_backward(in[0], Tensor(in[0].shape(), 1.0));
      grad[0] += 1e-2;
      *g = {grad};
    }
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s;
  };
  const GradCheckReport rep = grad_check(f, {random_tensor({5}, rng)}, 1e-4, 1e-4);
  EXPECT_FALSE(rep.passed());
  EXPECT_GT(rep.max_rel_error(), 1e-4);
}

TEST(grad_check, non_finite_value_throws) {
  GradClosure f = [](const std::vector<Tensor>& in, std::vector<Tensor>* g) {
    if (g) *g = {Tensor(in[0].shape())};
    return std::log(in[0][0]);
  };
  EXPECT_THROW(grad_check(f, {Tensor::vector({-1.0})}, 1e-4, 1e-4), NumericsError);
}

class gradient_suite : public ::testing::TestWithParam<std::size_t> {};

TEST_P(gradient_suite, twenty_seeds) {
  const testing::GradCase& c = testing::gradient_cases()[GetParam()];
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::GradProblem p = c.build(seed);
    const GradCheckReport rep = grad_check(p.f, p.inputs, testing::kFdStep, c.tolerance);
    EXPECT_TRUE(rep.passed()) << c.name << " seed " << seed << " rel " << rep.max_rel_error();
  }
}

INSTANTIATE_TEST_SUITE_P(kernels, gradient_suite,
                         ::testing::Range<std::size_t>(0, testing::gradient_cases().size()),
                         [](const auto& info) { return testing::gradient_cases()[info.param].name; });

TEST(checkpoint, round_trip_is_float32) {
  Rng rng(18);
  ParamStore ps;
  ps.add("a", random_tensor({3, 4}, rng));
  ps.add("b.c", random_tensor({5}, rng));
  const nlohmann::json config = {{"model_dim", 16}};
  const Checkpoint ck = deserialize_checkpoint(serialize_checkpoint(ps, config));
  ParamStore expected = ps;
  quantize_to_float(expected);
  ASSERT_EQ(ck.params.size(), 2u);
  EXPECT_EQ(ck.params.at("a").value, expected.at("a").value);
  EXPECT_EQ(ck.params.at("b.c").value, expected.at("b.c").value);
  EXPECT_EQ(ck.config, config);
  EXPECT_EQ(ck.config_hash, config_hash(config));
}

TEST(checkpoint, corrupt_bytes_rejected) {
  EXPECT_THROW(deserialize_checkpoint("not a checkpoint"), CheckpointError);
}

TEST(checkpoint, missing_file_rejected) {
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace bendr
