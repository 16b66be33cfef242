#pragma once

#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bendr/dataset.hpp"
#include "bendr/evalpost.hpp"
#include "bendr/model.hpp"
#include "bendr/optim.hpp"
#include "bendr/sampling.hpp"
#include "bendr/schedule.hpp"

namespace bendr {

struct TrainingSpec {
  OptimSpec optim;
  ScheduleSpec schedule;
  SamplerSpec sampler;
  SswceSpec sswce;
  FreezePolicy freeze = FreezePolicy::None;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainingSpec& s);
void from_json(const nlohmann::json& j, TrainingSpec& s);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  ScheduleDecision decision = ScheduleDecision::Continue;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  std::size_t best_epoch = 0;  // 0: initial parameters kept
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochLog&, const Model&)>;

// SSWCE mini-batch training monitored on `val` (on the training loss when
// `val` is empty). The best-validation parameters are restored on return.
// Throws TrainError on a non-finite loss or gradient.
TrainResult train_supervised(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                             const TrainingSpec& spec, Rng rng, const EpochCallback& on_epoch = {});

// Positive-class probability per window, evaluation mode.
std::vector<double> predict_probs(const Model& model, const WindowedDataset& ds);
double sswce_dataset_loss(const Model& model, const WindowedDataset& ds, const SswceSpec& spec);

std::string curve_csv(const std::vector<EpochLog>& curve);

// ---- self-supervised pretraining --------------------------------------------

struct PretrainSpec {
  MaskSpec mask;
  ContrastiveSpec contrastive;
  OptimSpec optim;
  ScheduleSpec schedule;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double val_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const PretrainSpec& s);
void from_json(const nlohmann::json& j, PretrainSpec& s);

struct PretrainEval {
  double loss = 0.0;
  double target_similarity = 0.0;
  double distractor_similarity = 0.0;
  std::size_t windows = 0;
};

// Mean contrastive statistics in evaluation mode; masks and distractors come
// from `rng`, so a copied rng reproduces the same draws.
PretrainEval evaluate_pretraining(Model& model, const WindowedDataset& ds, const PretrainSpec& spec,
                                  Rng rng);

struct PretrainLog {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double target_similarity = 0.0;
  double distractor_similarity = 0.0;
};

struct PretrainResult {
  ParamStore params;
  std::vector<PretrainLog> curve;
  std::size_t best_epoch = 0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

// Trains conv stage, mask embedding and transformer with the masked
// contrastive loss; the classifier is left untouched.
PretrainResult run_pretraining(const WindowedDataset& corpus, const ModelConfig& config,
                               const PretrainSpec& spec, Rng rng, const ParamStore* init = nullptr);

std::string curve_csv(const std::vector<PretrainLog>& curve);

// ---- second pretraining and LOOCV -------------------------------------------

struct SecondPretrainResult {
  ParamStore params;
  TrainResult train;
  std::vector<std::string> train_records;
  std::vector<std::string> val_records;
  std::set<std::string> subjects_used;
  std::size_t windows_used = 0;
};

// Records of every subject except `target`; ceil(20%) of them (none when only
// one exists) monitor validation. Throws ProtocolError for a corpus with
// fewer than two subjects or one lacking the target.
std::pair<std::vector<std::string>, std::vector<std::string>> second_pretraining_split(
    const Corpus& corpus, const std::string& target, Rng rng);

SecondPretrainResult run_second_pretraining(const Corpus& corpus, const std::string& target,
                                            const ModelConfig& config, const ParamStore& init,
                                            const TrainingSpec& spec, Rng rng);

struct FoldPlan {
  std::string subject_id;
  std::string test_record;
  std::vector<std::string> train_records;
  std::vector<std::string> val_records;
};

void to_json(nlohmann::json& j, const FoldPlan& p);

// One fold per record; validation takes ceil(0.2·(n−1)) of the remaining
// records via a per-fold shuffle. Throws ProtocolError when fewer than two
// records exist or the training set would be empty.
std::vector<FoldPlan> plan_loocv(const std::string& subject, const std::vector<std::string>& records,
                                 Rng rng);

struct FoldResult {
  FoldPlan plan;
  std::vector<double> probs;
  std::vector<int> truth;  // window labels of the test record
  std::vector<EventRange> truth_events;
  double window_s = 8.0;
  TrainResult train;
  EventScore raw_score;
};

FoldResult run_fold(const FoldPlan& plan, const Corpus& corpus, const ModelConfig& config,
                    const ParamStore& init, const TrainingSpec& spec, Rng rng,
                    double threshold = kDefaultThreshold, const EpochCallback& on_epoch = {});

}  // namespace bendr
