#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "bendr/errors.hpp"
#include "bendr/experiment.hpp"
#include "fixtures.hpp"

namespace bendr {
namespace {

namespace fs = std::filesystem;

TEST(experiment_config, unknown_key_rejected) {
  const nlohmann::json j = {{"seed", 1}, {"corpsu", "x"}};
  EXPECT_THROW(j.get<ExperimentConfig>(), ConfigError);
}

TEST(experiment_config, json_round_trip_preserves_hash) {
  ExperimentConfig c;
  c.seed = 11;
  c.corpus = "corpus";
  c.grid = {{3, 2}, {6, 4}};
  c.finetune.sampler.kind = SamplerKind::Smote;
  c.post.majority_first = false;
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.setups().size(), 2u);
  EXPECT_EQ(back.setups()[0].first, "conv3_layers2");
}

TEST(experiment_config, hash_ignores_output_and_jobs) {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.out_dir = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 99;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(experiment_config, validation) {
  ExperimentConfig c;
  c.corpus = "/nonexistent/corpus";
  EXPECT_NO_THROW(c.validate(false));
  EXPECT_THROW(c.validate(true), ConfigError);
  c.post.windows = {4};
  EXPECT_THROW(c.validate(false), ConfigError);
}

TEST(experiment_config, missing_file) {
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(post_config, variants_cover_methods_and_widths) {
  const PostConfig p;
  const auto v = p.variants();
  EXPECT_EQ(v.size(), 10u);
  EXPECT_EQ(v.front().method, PostMethod::None);
  std::size_t minpool = 0;
  for (const auto& s : v) minpool += s.method == PostMethod::MinPool;
  EXPECT_EQ(minpool, 3u);
}

TEST(summary, minpool_rows_never_exceed_raw_alarms) {
  Rng rng(3);
  std::vector<ScoredTrack> tracks;
  for (int i = 0; i < 6; ++i) {
    ScoredTrack t;
    t.record_id = "r" + std::to_string(i);
    for (int w = 0; w < 40; ++w) t.probs.push_back(rng.uniform());
    t.truth_events = {{10, 14}};
    tracks.push_back(t);
  }
  const auto rows = summarize("setup", tracks, PostConfig{});
  ASSERT_EQ(rows.size(), 10u);
  const SummaryRow& none = rows.front();
  EXPECT_EQ(none.method, "none");
  for (const auto& r : rows) {
    if (r.method == "minpool") EXPECT_LE(r.score.fp_per_h, none.score.fp_per_h);
  }
  const std::string csv = summary_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "setup,method,w,detected_pct,fp_per_h,detected,total,false_alarms,hours");
}

TEST(write_file_atomic, replaces_contents) {
  const fs::path p = fs::temp_directory_path() / "bendr_atomic_test.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  fs::remove(p);
}

TEST(evaluate_predictions, malformed_json_rejected) {
  const fs::path dir = fs::temp_directory_path() / "bendr_eval_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "fold.json") << "{\"probs\": [0.1, ";
  EXPECT_THROW(evaluate_predictions(dir, PostConfig{}), ConfigError);
  fs::remove_all(dir);
}

TEST(run_protocol, folds_cover_every_seizure_record) {
  const Corpus corpus = testing::small_corpus(3, 3, 41);
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.model = testing::small_model();
  cfg.second_pretrain.max_epochs = 1;
  cfg.second_pretrain.batch_size = 16;
  cfg.finetune.max_epochs = 1;
  cfg.finetune.batch_size = 16;
  cfg.init = InitPolicy::Random;
  cfg.subjects = {"sub02"};
  const ProtocolOutcome out = run_protocol(corpus, cfg, "s", cfg.model, nullptr);
  ASSERT_EQ(out.subjects.size(), 1u);
  const SubjectOutcome& s = out.subjects[0];
  ASSERT_TRUE(s.second.has_value());
  EXPECT_EQ(s.second->subjects_used.count("sub02"), 0u);
  ASSERT_EQ(s.folds.size(), 3u);
  std::set<std::string> tested;
  for (const auto& f : s.folds) tested.insert(f.plan.test_record);
  EXPECT_EQ(tested, (std::set<std::string>{"sub02_r01", "sub02_r02", "sub02_r03"}));
  const nlohmann::json j = fold_json(s.folds[0], cfg, "s");
  EXPECT_EQ(j.at("config_hash"), cfg.hash());
  EXPECT_EQ(j.at("probs").size(), s.folds[0].probs.size());
}

TEST(initial_params, pretrained_policy_needs_weights) {
  ExperimentConfig cfg;
  cfg.model = testing::small_model();
  cfg.init = InitPolicy::LoadShared;
  EXPECT_THROW(initial_params(cfg, cfg.model, nullptr, "sub01"), CheckpointError);
  cfg.init = InitPolicy::Random;
  EXPECT_EQ(initial_params(cfg, cfg.model, nullptr, "sub01").fingerprint(),
            initial_params(cfg, cfg.model, nullptr, "sub01").fingerprint());
}

}  // namespace
}  // namespace bendr
