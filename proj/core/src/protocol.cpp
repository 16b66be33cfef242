#include "bendr/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bendr/errors.hpp"

namespace bendr {

namespace {

const char* decision_name(ScheduleDecision d) {
  switch (d) {
    case ScheduleDecision::Continue: return "continue";
    case ScheduleDecision::ReduceLr: return "reduce_lr";
    case ScheduleDecision::Stop: return "stop";
  }
  return "?";
}

std::vector<Tensor> snapshot(const ParamStore& ps) {
  std::vector<Tensor> out;
  out.reserve(ps.size());
  for (const auto& p : ps.items()) out.push_back(p.value);
  return out;
}

void restore(ParamStore& ps, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) ps.items()[i].value = values[i];
}

std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  }
  return out;
}

void optimizer_step(ParamStore& params, AdamState& state, const OptimSpec& spec, std::size_t epoch) {
  try {
    adam_step(params, state, spec);
  } catch (const NumericsError& e) {
    throw TrainError("epoch " + std::to_string(epoch) + ": " + e.what());
  }
}

}  // namespace

// ---- specs ------------------------------------------------------------------

void TrainingSpec::validate() const {
  optim.validate();
  schedule.validate();
  sswce.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

void to_json(nlohmann::json& j, const TrainingSpec& s) {
  j = nlohmann::json{{"optim", s.optim},           {"schedule", s.schedule},
                     {"sampler", s.sampler},       {"sswce", s.sswce},
                     {"freeze", to_string(s.freeze)}, {"batch_size", s.batch_size},
                     {"max_epochs", s.max_epochs}};
}

void from_json(const nlohmann::json& j, TrainingSpec& s) {
  TrainingSpec d;
  s.optim = j.contains("optim") ? j.at("optim").get<OptimSpec>() : d.optim;
  s.schedule = j.contains("schedule") ? j.at("schedule").get<ScheduleSpec>() : d.schedule;
  s.sampler = j.contains("sampler") ? j.at("sampler").get<SamplerSpec>() : d.sampler;
  s.sswce = j.contains("sswce") ? j.at("sswce").get<SswceSpec>() : d.sswce;
  s.freeze = j.contains("freeze") ? parse_freeze_policy(j.at("freeze").get<std::string>()) : d.freeze;
  s.batch_size = j.value("batch_size", d.batch_size);
  s.max_epochs = j.value("max_epochs", d.max_epochs);
}

void PretrainSpec::validate() const {
  mask.validate();
  contrastive.validate();
  optim.validate();
  schedule.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const PretrainSpec& s) {
  j = nlohmann::json{{"mask", s.mask},         {"contrastive", s.contrastive},
                     {"optim", s.optim},       {"schedule", s.schedule},
                     {"batch_size", s.batch_size}, {"max_epochs", s.max_epochs},
                     {"val_fraction", s.val_fraction}};
}

void from_json(const nlohmann::json& j, PretrainSpec& s) {
  PretrainSpec d;
  s.mask = j.contains("mask") ? j.at("mask").get<MaskSpec>() : d.mask;
  s.contrastive = j.contains("contrastive") ? j.at("contrastive").get<ContrastiveSpec>() : d.contrastive;
  s.optim = j.contains("optim") ? j.at("optim").get<OptimSpec>() : d.optim;
  s.schedule = j.contains("schedule") ? j.at("schedule").get<ScheduleSpec>() : d.schedule;
  s.batch_size = j.value("batch_size", d.batch_size);
  s.max_epochs = j.value("max_epochs", d.max_epochs);
  s.val_fraction = j.value("val_fraction", d.val_fraction);
}

// ---- supervised training ----------------------------------------------------

std::vector<double> predict_probs(const Model& model, const WindowedDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& w : ds.windows) out.push_back(model.predict(w.data)[1]);
  return out;
}

double sswce_dataset_loss(const Model& model, const WindowedDataset& ds, const SswceSpec& spec) {
  if (ds.size() == 0) return 0.0;
  Tensor probs({ds.size(), 2});
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor p = model.predict(ds.windows[i].data);
    probs.at(i, 0) = p[0];
    probs.at(i, 1) = p[1];
    labels.push_back(ds.windows[i].label);
  }
  return sswce_loss(probs, labels, spec).loss;
}

TrainResult train_supervised(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                             const TrainingSpec& spec, Rng rng, const EpochCallback& on_epoch) {
  spec.validate();
  model.set_trainable(spec.freeze);
  TrainResult result;
  if (spec.max_epochs == 0) return result;
  if (train.size() == 0) throw ProtocolError("empty training set");

  WindowedDataset data = train;
  SamplerKind order_kind = spec.sampler.kind;
  if (spec.sampler.kind == SamplerKind::Smote) {
    Rng srng = rng.derive("smote");
    data = smote(train, spec.sampler.smote_k, srng);
  }

  ParamStore& params = model.params();
  AdamState state = AdamState::fresh(params, spec.optim);
  PlateauTracker tracker(spec.schedule);
  std::vector<Tensor> best = snapshot(params);
  const bool monitor_train = val.size() == 0;

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    Rng erng = rng.derive(epoch);
    Rng order_rng = erng.derive("order");
    Rng drop_rng = erng.derive("dropout");
    const auto order = epoch_order(data, order_kind, order_rng);
    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (const auto& batch : batches(order, spec.batch_size)) {
      params.zero_grad();
      std::size_t pos = 0;
      for (std::size_t i : batch) pos += data.windows[i].label == 1;
      const std::size_t neg = batch.size() - pos;
      double batch_loss = 0.0;
      for (std::size_t i : batch) {
        const Window& w = data.windows[i];
        Model::ClassifyTrace trace;
        Tensor probs = model.forward_classify(w.data, true, drop_rng, &trace);
        const double weight = sswce_sample_weight(w.label, pos, neg, spec.sswce);
        const auto y = static_cast<std::size_t>(w.label);
        const double p = probs[y];
        batch_loss += weight * -std::log(std::max(p, kProbClamp));
        Tensor grad({1, 2});
        grad[y] = p > kProbClamp ? -weight / p : 0.0;
        model.backward_classify(trace, grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainError("epoch " + std::to_string(epoch) + ": training loss is not finite");
      }
      optimizer_step(params, state, spec.optim, epoch);
      loss_sum += batch_loss;
      ++batch_count;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batch_count, 1));
    log.val_loss = monitor_train ? log.train_loss : sswce_dataset_loss(model, val, spec.sswce);
    log.lr = state.lr;
    if (!std::isfinite(log.val_loss)) {
      throw TrainError("epoch " + std::to_string(epoch) + ": validation loss is not finite");
    }
    log.decision = tracker.observe(log.val_loss);
    log.improved = tracker.improved_last();
    if (log.improved) {
      best = snapshot(params);
      result.best_epoch = epoch;
      result.best_val_loss = log.val_loss;
    }
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log, model);
    if (log.decision == ScheduleDecision::Stop) {
      result.early_stopped = true;
      break;
    }
    if (log.decision == ScheduleDecision::ReduceLr) state.lr *= spec.schedule.plateau_factor;
  }
  restore(params, best);
  return result;
}

std::string curve_csv(const std::vector<EpochLog>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,lr,decision,improved\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << ','
       << decision_name(e.decision) << ',' << (e.improved ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---- pretraining ------------------------------------------------------------

PretrainEval evaluate_pretraining(Model& model, const WindowedDataset& ds, const PretrainSpec& spec,
                                  Rng rng) {
  PretrainEval out;
  for (const auto& w : ds.windows) {
    const auto st = model.pretrain_step(w.data, spec.mask, spec.contrastive, false, rng, false);
    if (st.masked == 0) continue;
    out.loss += st.loss;
    out.target_similarity += st.target_similarity;
    out.distractor_similarity += st.distractor_similarity;
    ++out.windows;
  }
  if (out.windows > 0) {
    const double n = static_cast<double>(out.windows);
    out.loss /= n;
    out.target_similarity /= n;
    out.distractor_similarity /= n;
  }
  return out;
}

PretrainResult run_pretraining(const WindowedDataset& corpus, const ModelConfig& config,
                               const PretrainSpec& spec, Rng rng, const ParamStore* init) {
  spec.validate();
  if (corpus.size() == 0) throw ProtocolError("pretraining corpus is empty");

  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng split_rng = rng.derive("split");
  split_rng.shuffle(idx);
  auto n_val = static_cast<std::size_t>(std::ceil(spec.val_fraction * static_cast<double>(idx.size())));
  if (n_val >= idx.size()) n_val = idx.size() - 1;
  WindowedDataset train, val;
  train.window_s = val.window_s = corpus.window_s;
  train.channel_count = val.channel_count = corpus.channel_count;
  train.samples_per_window = val.samples_per_window = corpus.samples_per_window;
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k < n_val ? val : train).windows.push_back(corpus.windows[idx[k]]);
  }

  Rng init_rng = rng.derive("init");
  Model model(config, init ? *init : Model::init_random(config, init_rng));
  for (auto& p : model.params().items()) p.trainable = !is_classifier_param(p.name);

  PretrainResult result;
  result.train_windows = train.size();
  result.val_windows = val.size();
  const Rng val_rng = rng.derive("val");
  const Rng train_eval_rng = rng.derive("train_eval");
  const WindowedDataset& monitor = val.size() ? val : train;

  {
    PretrainLog log;
    const PretrainEval tr = evaluate_pretraining(model, train, spec, train_eval_rng);
    const PretrainEval va = evaluate_pretraining(model, monitor, spec, val_rng);
    log.train_loss = tr.loss;
    log.val_loss = va.loss;
    log.lr = spec.optim.lr;
    log.target_similarity = va.target_similarity;
    log.distractor_similarity = va.distractor_similarity;
    result.curve.push_back(log);
  }

  ParamStore& params = model.params();
  AdamState state = AdamState::fresh(params, spec.optim);
  PlateauTracker tracker(spec.schedule);
  std::vector<Tensor> best = snapshot(params);
  double best_loss = result.curve.front().val_loss;

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    Rng erng = rng.derive(epoch);
    Rng order_rng = erng.derive("order");
    Rng step_rng = erng.derive("step");
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (const auto& batch : batches(order, spec.batch_size)) {
      params.zero_grad();
      std::size_t used = 0;
      double batch_loss = 0.0;
      for (std::size_t i : batch) {
        const auto st =
            model.pretrain_step(train.windows[i].data, spec.mask, spec.contrastive, true, step_rng, true);
        if (st.masked == 0) continue;
        batch_loss += st.loss;
        ++used;
      }
      if (used == 0) continue;
      if (!std::isfinite(batch_loss)) {
        throw TrainError("epoch " + std::to_string(epoch) + ": contrastive loss is not finite");
      }
      params.scale_grad(1.0 / static_cast<double>(used));
      optimizer_step(params, state, spec.optim, epoch);
      loss_sum += batch_loss;
      counted += used;
    }

    PretrainLog log;
    log.epoch = epoch;
    log.train_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
    const PretrainEval va = evaluate_pretraining(model, monitor, spec, val_rng);
    log.val_loss = va.loss;
    log.lr = state.lr;
    log.target_similarity = va.target_similarity;
    log.distractor_similarity = va.distractor_similarity;
    if (!std::isfinite(log.val_loss)) {
      throw TrainError("epoch " + std::to_string(epoch) + ": validation loss is not finite");
    }
    result.curve.push_back(log);

    const ScheduleDecision decision = tracker.observe(log.val_loss);
    if (log.val_loss < best_loss) {
      best_loss = log.val_loss;
      best = snapshot(params);
      result.best_epoch = epoch;
    }
    if (decision == ScheduleDecision::Stop) break;
    if (decision == ScheduleDecision::ReduceLr) state.lr *= spec.schedule.plateau_factor;
  }
  restore(params, best);
  for (auto& p : params.items()) p.trainable = true;
  result.params = std::move(params);
  return result;
}

std::string curve_csv(const std::vector<PretrainLog>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,lr,target_similarity,distractor_similarity\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << ','
       << e.target_similarity << ',' << e.distractor_similarity << '\n';
  }
  return os.str();
}

// ---- second pretraining -----------------------------------------------------

std::pair<std::vector<std::string>, std::vector<std::string>> second_pretraining_split(
    const Corpus& corpus, const std::string& target, Rng rng) {
  const auto subjects = corpus.subjects();
  if (subjects.size() < 2) {
    throw ProtocolError("second pretraining needs at least two subjects, corpus has " +
                        std::to_string(subjects.size()));
  }
  if (!corpus.has_subject(target)) throw ProtocolError("target subject not in corpus: " + target);

  std::vector<std::string> others;
  for (const auto& r : corpus.records) {
    if (r.subject_id != target) others.push_back(r.record_id);
  }
  rng.shuffle(others);
  const std::size_t n_val =
      others.size() > 1 ? static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(others.size()))) : 0;
  std::vector<std::string> val(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> train(others.begin() + static_cast<std::ptrdiff_t>(n_val), others.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

SecondPretrainResult run_second_pretraining(const Corpus& corpus, const std::string& target,
                                            const ModelConfig& config, const ParamStore& init,
                                            const TrainingSpec& spec, Rng rng) {
  auto [train_ids, val_ids] = second_pretraining_split(corpus, target, rng.derive("split"));
  WindowedDataset train = corpus.windows_of(train_ids);
  WindowedDataset val = corpus.windows_of(val_ids);

  SecondPretrainResult result;
  for (const auto* ds : {&train, &val}) {
    for (const auto& w : ds->windows) {
      if (w.subject_id == target) {
        throw ProtocolError("second pretraining set for " + target + " contains its window " +
                            w.record_id + "#" + std::to_string(w.index));
      }
      result.subjects_used.insert(w.subject_id);
    }
  }
  result.windows_used = train.size() + val.size();
  result.train_records = train_ids;
  result.val_records = val_ids;

  Model model(config, init);
  result.train = train_supervised(model, train, val, spec, rng.derive("train"));
  result.params = std::move(model.params());
  for (auto& p : result.params.items()) p.trainable = true;
  return result;
}

// ---- LOOCV ------------------------------------------------------------------

void to_json(nlohmann::json& j, const FoldPlan& p) {
  j = nlohmann::json{{"subject", p.subject_id},
                     {"test", p.test_record},
                     {"train", p.train_records},
                     {"val", p.val_records}};
}

std::vector<FoldPlan> plan_loocv(const std::string& subject, const std::vector<std::string>& records,
                                 Rng rng) {
  if (records.size() < 2) {
    throw ProtocolError("subject " + subject + " has " + std::to_string(records.size()) +
                        " seizure records; LOOCV needs at least 2");
  }
  std::vector<FoldPlan> plans;
  for (std::size_t f = 0; f < records.size(); ++f) {
    FoldPlan plan;
    plan.subject_id = subject;
    plan.test_record = records[f];
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (i != f) rest.push_back(records[i]);
    }
    Rng frng = rng.derive(f);
    frng.shuffle(rest);
    const auto n_val = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(rest.size())));
    plan.val_records.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    plan.train_records.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    if (plan.train_records.empty()) {
      throw ProtocolError("subject " + subject + ", fold " + records[f] +
                          ": no training records left after the validation split");
    }
    std::sort(plan.val_records.begin(), plan.val_records.end());
    std::sort(plan.train_records.begin(), plan.train_records.end());
    plans.push_back(std::move(plan));
  }
  return plans;
}

FoldResult run_fold(const FoldPlan& plan, const Corpus& corpus, const ModelConfig& config,
                    const ParamStore& init, const TrainingSpec& spec, Rng rng, double threshold,
                    const EpochCallback& on_epoch) {
  const RecordWindows& test = corpus.record(plan.test_record);
  if (test.subject_id != plan.subject_id) {
    throw ProtocolError("fold test record " + plan.test_record + " belongs to another subject");
  }
  Model model(config, init);
  FoldResult result;
  result.plan = plan;
  result.train = train_supervised(model, corpus.windows_of(plan.train_records),
                                  corpus.windows_of(plan.val_records), spec, rng, on_epoch);
  result.probs = predict_probs(model, test.windows);
  for (const auto& w : test.windows.windows) result.truth.push_back(w.label);
  result.window_s = test.windows.window_s;
  result.truth_events =
      truth_events(test.seizures, test.windows.window_s, test.sample_rate_hz, test.windows.size());

  PredictionTrack track;
  track.record_id = test.record_id;
  track.window_s = result.window_s;
  track.probs = result.probs;
  track.threshold = threshold;
  track.labels = threshold_labels(result.probs, threshold);
  track.truth_events = result.truth_events;
  result.raw_score = score_track(track);
  return result;
}

}  // namespace bendr
