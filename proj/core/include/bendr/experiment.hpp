#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bendr/dataset.hpp"
#include "bendr/evalpost.hpp"
#include "bendr/protocol.hpp"

namespace bendr {

struct GridEntry {
  std::size_t conv_blocks = 6;
  std::size_t transformer_layers = 4;

  std::string name() const;
};

struct PostConfig {
  std::vector<PostMethod> methods{PostMethod::None, PostMethod::Majority, PostMethod::MinPool,
                                  PostMethod::MajorityMinPool};
  std::vector<std::size_t> windows{3, 5, 7};
  PoolDomain domain = PoolDomain::Labels;
  bool majority_first = true;
  double threshold = kDefaultThreshold;

  // One spec per (method, w); "none" appears once.
  std::vector<PostSpec> variants() const;
};

void to_json(nlohmann::json& j, const PostConfig& p);
void from_json(const nlohmann::json& j, PostConfig& p);
void to_json(nlohmann::json& j, const PreprocessOptions& p);
void from_json(const nlohmann::json& j, PreprocessOptions& p);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string corpus;
  std::string pretrain_corpus;  // defaults to `corpus`
  std::string init_checkpoint;  // overrides the pretraining stage output
  std::string out_dir = "out";
  std::vector<std::string> montage;
  std::vector<std::string> subjects;  // empty: every subject
  ModelConfig model;
  std::vector<GridEntry> grid;  // empty: `model` as given
  PreprocessOptions preprocess;
  PretrainSpec pretrain;
  TrainingSpec second_pretrain;
  TrainingSpec finetune;
  bool second_pretraining = true;
  InitPolicy init = InitPolicy::LoadShared;
  PostConfig post;
  std::size_t jobs = 1;

  // Throws ConfigError; with `check_paths` also requires the corpora to exist.
  void validate(bool check_paths) const;

  // Setups to run: (name, model config).
  std::vector<std::pair<std::string, ModelConfig>> setups() const;

  // Hash over everything that affects results (not out_dir or jobs).
  std::string hash() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

using Logger = std::function<void(const std::string&)>;

// Minimal per-record information needed for scoring.
struct ScoredTrack {
  std::string subject_id;
  std::string record_id;
  double window_s = 8.0;
  std::vector<double> probs;
  std::vector<EventRange> truth_events;
};

struct SummaryRow {
  std::string setup;
  std::string method;
  std::size_t w = 0;
  EventScore score;
};

std::vector<SummaryRow> summarize(const std::string& setup, const std::vector<ScoredTrack>& tracks,
                                  const PostConfig& post);
std::string summary_csv(const std::vector<SummaryRow>& rows);
nlohmann::json summary_json(const std::vector<SummaryRow>& rows);

// Post-processing of one track under every configured variant.
nlohmann::json post_json(const ScoredTrack& track, const PostConfig& post);

struct SubjectOutcome {
  std::string subject_id;
  std::optional<SecondPretrainResult> second;
  std::vector<FoldResult> folds;
};

struct ProtocolOutcome {
  std::string setup;
  std::vector<SubjectOutcome> subjects;
  EventScore raw;
  std::vector<SummaryRow> table;

  std::vector<ScoredTrack> tracks() const;
};

Rng experiment_rng(const ExperimentConfig& cfg, std::string_view stage, std::string_view key = {});

// Initial parameters for a subject: from `pretrained` under cfg.init, or
// random when cfg.init is Random.
ParamStore initial_params(const ExperimentConfig& cfg, const ModelConfig& model,
                          const ParamStore* pretrained, const std::string& subject);

// Subjects to evaluate and their seizure-containing records.
std::vector<std::string> selected_subjects(const ExperimentConfig& cfg, const Corpus& corpus);
std::vector<std::string> seizure_records(const Corpus& corpus, const std::string& subject);

std::vector<FoldPlan> plan_subject(const ExperimentConfig& cfg, const Corpus& corpus,
                                   const std::string& subject);

// Second pretraining (when enabled) then LOOCV for every selected subject.
// `second_init` supplies an already trained second-pretraining checkpoint per
// subject and skips that stage when it returns a value.
using SecondSource = std::function<std::optional<ParamStore>(const std::string& subject)>;
ProtocolOutcome run_protocol(const Corpus& corpus, const ExperimentConfig& cfg,
                             const std::string& setup, const ModelConfig& model,
                             const ParamStore* pretrained, const Logger& log = {},
                             const SecondSource& second_init = {});

nlohmann::json fold_json(const FoldResult& fold, const ExperimentConfig& cfg, const std::string& setup);
nlohmann::json protocol_json(const ProtocolOutcome& outcome, const ExperimentConfig& cfg,
                             const ModelConfig& model);

// ---- on-disk stages used by the command-line tool ---------------------------

Corpus load_labelled_corpus(const ExperimentConfig& cfg);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// <out>/<setup>/pretrain.ckpt, pretrain_loss.csv, pretrain.json
void stage_pretrain(const ExperimentConfig& cfg, const Logger& log);
// <out>/<setup>/second/<subject>.ckpt + curve CSV and JSON
void stage_second_pretrain(const ExperimentConfig& cfg, const Logger& log);
// <out>/<setup>/folds/*.json, results.json, summary.csv; with `dry_run` only
// the fold plans are returned.
nlohmann::json stage_loocv(const ExperimentConfig& cfg, bool dry_run, const Logger& log);
// All three stages.
void stage_all(const ExperimentConfig& cfg, const Logger& log);

// Reads every fold JSON below `predictions_dir` and scores the variants.
std::vector<SummaryRow> evaluate_predictions(const std::filesystem::path& predictions_dir,
                                             const PostConfig& post);

}  // namespace bendr
