#include "bendr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "bendr/checkpoint.hpp"
#include "bendr/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bendr {

// ---- config -----------------------------------------------------------------

std::string GridEntry::name() const {
  return "conv" + std::to_string(conv_blocks) + "_layers" + std::to_string(transformer_layers);
}

std::vector<PostSpec> PostConfig::variants() const {
  std::vector<PostSpec> out;
  for (PostMethod m : methods) {
    if (m == PostMethod::None) {
      out.push_back({m, 1, domain, majority_first, threshold});
      continue;
    }
    for (std::size_t w : windows) out.push_back({m, w, domain, majority_first, threshold});
  }
  return out;
}

void to_json(json& j, const PostConfig& p) {
  json methods = json::array();
  for (PostMethod m : p.methods) methods.push_back(to_string(m));
  j = json{{"methods", methods},
           {"windows", p.windows},
           {"domain", to_string(p.domain)},
           {"order", p.majority_first ? "majority_first" : "minpool_first"},
           {"threshold", p.threshold}};
}

void from_json(const json& j, PostConfig& p) {
  PostConfig d;
  p = d;
  if (j.contains("methods")) {
    p.methods.clear();
    for (const auto& m : j.at("methods")) p.methods.push_back(parse_post_method(m.get<std::string>()));
  }
  p.windows = j.value("windows", d.windows);
  if (j.contains("domain")) p.domain = parse_pool_domain(j.at("domain").get<std::string>());
  if (j.contains("order")) {
    const std::string o = j.at("order").get<std::string>();
    if (o != "majority_first" && o != "minpool_first") {
      throw ConfigError("post-processing order must be majority_first or minpool_first");
    }
    p.majority_first = o == "majority_first";
  }
  p.threshold = j.value("threshold", d.threshold);
}

void to_json(json& j, const PreprocessOptions& p) {
  j = json{{"filter", p.filter},
           {"order", p.filter_spec.order},
           {"low_hz", p.filter_spec.low_hz},
           {"high_hz", p.filter_spec.high_hz},
           {"norm", to_string(p.norm)},
           {"window_s", p.window_s}};
}

void from_json(const json& j, PreprocessOptions& p) {
  PreprocessOptions d;
  p.filter = j.value("filter", d.filter);
  p.filter_spec.order = j.value("order", d.filter_spec.order);
  p.filter_spec.low_hz = j.value("low_hz", d.filter_spec.low_hz);
  p.filter_spec.high_hz = j.value("high_hz", d.filter_spec.high_hz);
  p.norm = j.contains("norm") ? parse_norm_mode(j.at("norm").get<std::string>()) : d.norm;
  p.window_s = j.value("window_s", d.window_s);
}

void ExperimentConfig::validate(bool check_paths) const {
  model.validate();
  for (const auto& [name, m] : setups()) m.validate();
  pretrain.validate();
  second_pretrain.validate();
  finetune.validate();
  if (!(preprocess.window_s > 0.0)) throw ConfigError("window_s must be positive");
  if (post.methods.empty()) throw ConfigError("at least one post-processing method required");
  for (std::size_t w : post.windows) {
    if (w == 0 || w % 2 == 0) throw ConfigError("post-processing windows must be odd");
  }
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  if (check_paths) {
    if (corpus.empty()) throw ConfigError("config lacks a corpus path");
    if (!fs::is_directory(corpus)) throw ConfigError("corpus directory not found: " + corpus);
    if (!pretrain_corpus.empty() && !fs::is_directory(pretrain_corpus)) {
      throw ConfigError("pretraining corpus directory not found: " + pretrain_corpus);
    }
    if (!init_checkpoint.empty() && !fs::is_regular_file(init_checkpoint)) {
      throw ConfigError("checkpoint not found: " + init_checkpoint);
    }
  }
}

std::vector<std::pair<std::string, ModelConfig>> ExperimentConfig::setups() const {
  std::vector<std::pair<std::string, ModelConfig>> out;
  if (grid.empty()) {
    out.emplace_back(GridEntry{model.conv_blocks(), model.transformer_layers}.name(), model);
    return out;
  }
  for (const auto& g : grid) out.emplace_back(g.name(), model.with_shape(g.conv_blocks, g.transformer_layers));
  return out;
}

std::string ExperimentConfig::hash() const {
  json j = *this;
  j.erase("out_dir");
  j.erase("jobs");
  return config_hash(j);
}

void to_json(json& j, const ExperimentConfig& c) {
  json grid = json::array();
  for (const auto& g : c.grid) {
    grid.push_back({{"conv_blocks", g.conv_blocks}, {"transformer_layers", g.transformer_layers}});
  }
  j = json{{"seed", c.seed},
           {"corpus", c.corpus},
           {"pretrain_corpus", c.pretrain_corpus},
           {"init_checkpoint", c.init_checkpoint},
           {"out_dir", c.out_dir},
           {"montage", c.montage},
           {"subjects", c.subjects},
           {"model", c.model},
           {"grid", grid},
           {"preprocess", c.preprocess},
           {"pretrain", c.pretrain},
           {"second_pretrain", c.second_pretrain},
           {"finetune", c.finetune},
           {"second_pretraining", c.second_pretraining},
           {"init", to_string(c.init)},
           {"post", c.post},
           {"jobs", c.jobs}};
}

void from_json(const json& j, ExperimentConfig& c) {
  static const char* known[] = {"seed",     "corpus",          "pretrain_corpus", "init_checkpoint",
                                "out_dir",  "montage",         "subjects",        "model",
                                "grid",     "preprocess",      "pretrain",        "second_pretrain",
                                "finetune", "second_pretraining", "init",         "post",
                                "jobs"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  ExperimentConfig d;
  c.seed = j.value("seed", d.seed);
  c.corpus = j.value("corpus", d.corpus);
  c.pretrain_corpus = j.value("pretrain_corpus", d.pretrain_corpus);
  c.init_checkpoint = j.value("init_checkpoint", d.init_checkpoint);
  c.out_dir = j.value("out_dir", d.out_dir);
  c.montage = j.value("montage", d.montage);
  c.subjects = j.value("subjects", d.subjects);
  c.model = j.contains("model") ? j.at("model").get<ModelConfig>() : d.model;
  c.grid.clear();
  if (j.contains("grid")) {
    for (const auto& g : j.at("grid")) {
      c.grid.push_back({g.value("conv_blocks", std::size_t{6}), g.value("transformer_layers", std::size_t{4})});
    }
  }
  c.preprocess = j.contains("preprocess") ? j.at("preprocess").get<PreprocessOptions>() : d.preprocess;
  c.pretrain = j.contains("pretrain") ? j.at("pretrain").get<PretrainSpec>() : d.pretrain;
  c.second_pretrain = j.contains("second_pretrain") ? j.at("second_pretrain").get<TrainingSpec>() : d.second_pretrain;
  c.finetune = j.contains("finetune") ? j.at("finetune").get<TrainingSpec>() : d.finetune;
  c.second_pretraining = j.value("second_pretraining", d.second_pretraining);
  c.init = j.contains("init") ? parse_init_policy(j.at("init").get<std::string>()) : d.init;
  c.post = j.contains("post") ? j.at("post").get<PostConfig>() : d.post;
  c.jobs = j.value("jobs", d.jobs);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(in).get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

// ---- scoring ----------------------------------------------------------------

namespace {

EventScore score_labels(const ScoredTrack& t, const std::vector<int>& labels, double threshold) {
  PredictionTrack track;
  track.record_id = t.record_id;
  track.window_s = t.window_s;
  track.probs = t.probs;
  track.threshold = threshold;
  track.labels = labels;
  track.truth_events = t.truth_events;
  return score_track(track);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::vector<SummaryRow> summarize(const std::string& setup, const std::vector<ScoredTrack>& tracks,
                                  const PostConfig& post) {
  std::vector<SummaryRow> rows;
  if (tracks.empty()) return rows;
  for (const PostSpec& spec : post.variants()) {
    std::vector<EventScore> scores;
    for (const auto& t : tracks) {
      scores.push_back(score_labels(t, postprocess(t.probs, spec).final_labels(), spec.threshold));
    }
    rows.push_back({setup, to_string(spec.method), spec.method == PostMethod::None ? 0 : spec.w,
                    aggregate(scores)});
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "setup,method,w,detected_pct,fp_per_h,detected,total,false_alarms,hours\n";
  for (const auto& r : rows) {
    os << r.setup << ',' << r.method << ',' << r.w << ','
       << (r.score.sensitivity ? fmt(100.0 * *r.score.sensitivity) : std::string("nan")) << ','
       << fmt(r.score.fp_per_h) << ',' << r.score.detected_events << ',' << r.score.total_events << ','
       << r.score.false_alarms << ',' << fmt(r.score.duration_h) << '\n';
  }
  return os.str();
}

json summary_json(const std::vector<SummaryRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"setup", r.setup}, {"method", r.method}, {"w", r.w}, {"score", r.score}});
  }
  return out;
}

json post_json(const ScoredTrack& track, const PostConfig& post) {
  json out = json::object();
  for (const PostSpec& spec : post.variants()) {
    const PostStages stages = postprocess(track.probs, spec);
    json st = json::object();
    for (const auto& [name, labels] : stages.stages) st[name] = labels;
    out[spec.name()] = {{"stages", st}, {"score", score_labels(track, stages.final_labels(), spec.threshold)}};
  }
  return out;
}

std::vector<ScoredTrack> ProtocolOutcome::tracks() const {
  std::vector<ScoredTrack> out;
  for (const auto& s : subjects) {
    for (const auto& f : s.folds) {
      out.push_back({s.subject_id, f.plan.test_record, f.window_s, f.probs, f.truth_events});
    }
  }
  return out;
}

// ---- protocol ---------------------------------------------------------------

Rng experiment_rng(const ExperimentConfig& cfg, std::string_view stage, std::string_view key) {
  Rng r = Rng(cfg.seed).derive(stage);
  return key.empty() ? r : r.derive(key);
}

ParamStore initial_params(const ExperimentConfig& cfg, const ModelConfig& model,
                          const ParamStore* pretrained, const std::string& subject) {
  Rng rng = experiment_rng(cfg, "init", subject);
  if (cfg.init != InitPolicy::Random && !pretrained) {
    throw CheckpointError(to_string(cfg.init) + " initialisation needs a pretrained checkpoint");
  }
  return init_weights(model, cfg.init, pretrained, rng);
}

std::vector<std::string> selected_subjects(const ExperimentConfig& cfg, const Corpus& corpus) {
  if (cfg.subjects.empty()) return corpus.subjects();
  for (const auto& s : cfg.subjects) {
    if (!corpus.has_subject(s)) throw ProtocolError("subject not in corpus: " + s);
  }
  return cfg.subjects;
}

std::vector<std::string> seizure_records(const Corpus& corpus, const std::string& subject) {
  std::vector<std::string> out;
  for (const auto* r : corpus.records_of(subject)) {
    if (r->has_seizures()) out.push_back(r->record_id);
  }
  return out;
}

std::vector<FoldPlan> plan_subject(const ExperimentConfig& cfg, const Corpus& corpus,
                                   const std::string& subject) {
  return plan_loocv(subject, seizure_records(corpus, subject), experiment_rng(cfg, "fold", subject));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < jobs; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ProtocolOutcome run_protocol(const Corpus& corpus, const ExperimentConfig& cfg, const std::string& setup,
                             const ModelConfig& model, const ParamStore* pretrained, const Logger& log,
                             const SecondSource& second_init) {
  const auto subjects = selected_subjects(cfg, corpus);
  ProtocolOutcome outcome;
  outcome.setup = setup;
  outcome.subjects.resize(subjects.size());
  std::mutex log_mu;
  auto say = [&](const std::string& m) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mu);
    log(m);
  };

  parallel_for(subjects.size(), cfg.jobs, [&](std::size_t si) {
    const std::string& subject = subjects[si];
    SubjectOutcome& so = outcome.subjects[si];
    so.subject_id = subject;
    const auto plans = plan_subject(cfg, corpus, subject);

    ParamStore init;
    std::optional<ParamStore> given = second_init ? second_init(subject) : std::nullopt;
    if (given) {
      init = std::move(*given);
    } else if (cfg.second_pretraining) {
      say(setup + ": second pretraining for " + subject);
      so.second = run_second_pretraining(corpus, subject, model,
                                         initial_params(cfg, model, pretrained, subject),
                                         cfg.second_pretrain, experiment_rng(cfg, "second", subject));
      init = so.second->params;
    } else {
      init = initial_params(cfg, model, pretrained, subject);
    }

    for (std::size_t f = 0; f < plans.size(); ++f) {
      say(setup + ": " + subject + " fold " + std::to_string(f + 1) + "/" + std::to_string(plans.size()) +
          " (test " + plans[f].test_record + ")");
      Rng frng = experiment_rng(cfg, "finetune", subject).derive(f);
      try {
        so.folds.push_back(run_fold(plans[f], corpus, model, init, cfg.finetune, frng, cfg.post.threshold));
      } catch (const TrainError& e) {
        throw TrainError("subject " + subject + ", fold " + plans[f].test_record + ": " + e.what());
      }
    }
  });

  std::vector<EventScore> raw;
  for (const auto& s : outcome.subjects) {
    for (const auto& f : s.folds) raw.push_back(f.raw_score);
  }
  if (!raw.empty()) outcome.raw = aggregate(raw);
  outcome.table = summarize(setup, outcome.tracks(), cfg.post);
  return outcome;
}

json fold_json(const FoldResult& fold, const ExperimentConfig& cfg, const std::string& setup) {
  json curve = json::array();
  for (const auto& e : fold.train.curve) {
    curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}});
  }
  const ScoredTrack track{fold.plan.subject_id, fold.plan.test_record, fold.window_s, fold.probs,
                          fold.truth_events};
  return json{{"config_hash", cfg.hash()},
              {"setup", setup},
              {"plan", fold.plan},
              {"record", fold.plan.test_record},
              {"subject", fold.plan.subject_id},
              {"window_s", fold.window_s},
              {"threshold", cfg.post.threshold},
              {"probs", fold.probs},
              {"truth", fold.truth},
              {"truth_events", fold.truth_events},
              {"best_epoch", fold.train.best_epoch},
              {"curve", curve},
              {"raw", fold.raw_score},
              {"post", post_json(track, cfg.post)}};
}

json protocol_json(const ProtocolOutcome& outcome, const ExperimentConfig& cfg, const ModelConfig& model) {
  json subjects = json::array();
  for (const auto& s : outcome.subjects) {
    json folds = json::array();
    for (const auto& f : s.folds) {
      folds.push_back({{"test", f.plan.test_record}, {"best_epoch", f.train.best_epoch}, {"raw", f.raw_score}});
    }
    json entry{{"subject", s.subject_id}, {"folds", folds}};
    if (s.second) {
      entry["second_pretraining"] = {{"train_records", s.second->train_records},
                                     {"val_records", s.second->val_records},
                                     {"windows", s.second->windows_used},
                                     {"best_epoch", s.second->train.best_epoch}};
    }
    subjects.push_back(entry);
  }
  return json{{"config_hash", cfg.hash()},
              {"setup", outcome.setup},
              {"model", model},
              {"subjects", subjects},
              {"aggregate", outcome.raw},
              {"table", summary_json(outcome.table)}};
}

// ---- files ------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ConfigError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Corpus load_labelled_corpus(const ExperimentConfig& cfg) {
  return load_corpus(cfg.corpus, cfg.montage, cfg.preprocess);
}

namespace {

fs::path setup_dir(const ExperimentConfig& cfg, const std::string& setup) {
  return fs::path(cfg.out_dir) / setup;
}

std::string safe(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return out;
}

std::optional<ParamStore> pretrained_for(const ExperimentConfig& cfg, const std::string& setup,
                                         const ModelConfig& model) {
  fs::path path = cfg.init_checkpoint;
  if (path.empty()) {
    path = setup_dir(cfg, setup) / "pretrain.ckpt";
    if (!fs::exists(path)) return std::nullopt;
  }
  Checkpoint ck = load_checkpoint(path);
  return std::move(ck.params);
}

void check_hash(const Checkpoint& ck, const ExperimentConfig& cfg, const fs::path& path) {
  if (ck.config.contains("experiment_hash") && ck.config.at("experiment_hash") != cfg.hash()) {
    throw ConfigError("checkpoint " + path.string() +
                      " was produced by a different configuration; refusing to resume");
  }
}

json checkpoint_config(const ExperimentConfig& cfg, const ModelConfig& model) {
  return json{{"model", model}, {"experiment_hash", cfg.hash()}};
}

}  // namespace

void stage_pretrain(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate(true);
  const std::string dir = cfg.pretrain_corpus.empty() ? cfg.corpus : cfg.pretrain_corpus;
  if (log) log("loading pretraining corpus " + dir);
  const WindowedDataset windows = load_corpus(dir, cfg.montage, cfg.preprocess).all_windows();
  for (const auto& [setup, model] : cfg.setups()) {
    if (log) log(setup + ": pretraining on " + std::to_string(windows.size()) + " windows");
    const PretrainResult r = run_pretraining(windows, model, cfg.pretrain, experiment_rng(cfg, "pretrain"));
    const fs::path out = setup_dir(cfg, setup);
    const std::string bytes = serialize_checkpoint(r.params, checkpoint_config(cfg, model));
    write_file_atomic(out / "pretrain.ckpt", bytes);
    write_file_atomic(out / "pretrain_loss.csv", curve_csv(r.curve));
    const auto& last = r.curve.back();
    const json summary{{"config_hash", cfg.hash()},
                       {"setup", setup},
                       {"train_windows", r.train_windows},
                       {"val_windows", r.val_windows},
                       {"best_epoch", r.best_epoch},
                       {"final_val_loss", last.val_loss},
                       {"target_similarity", last.target_similarity},
                       {"distractor_similarity", last.distractor_similarity}};
    write_file_atomic(out / "pretrain.json", summary.dump(2) + "\n");
  }
}

void stage_second_pretrain(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate(true);
  const Corpus corpus = load_labelled_corpus(cfg);
  for (const auto& [setup, model] : cfg.setups()) {
    const auto pretrained = pretrained_for(cfg, setup, model);
    const auto subjects = selected_subjects(cfg, corpus);
    std::mutex mu;
    parallel_for(subjects.size(), cfg.jobs, [&](std::size_t i) {
      const std::string& subject = subjects[i];
      if (log) {
        std::lock_guard<std::mutex> lock(mu);
        log(setup + ": second pretraining for " + subject);
      }
      const SecondPretrainResult r =
          run_second_pretraining(corpus, subject, model,
                                 initial_params(cfg, model, pretrained ? &*pretrained : nullptr, subject),
                                 cfg.second_pretrain, experiment_rng(cfg, "second", subject));
      const fs::path out = setup_dir(cfg, setup) / "second";
      write_file_atomic(out / (safe(subject) + ".ckpt"),
                        serialize_checkpoint(r.params, checkpoint_config(cfg, model)));
      write_file_atomic(out / (safe(subject) + "_loss.csv"), curve_csv(r.train.curve));
      const json summary{{"config_hash", cfg.hash()},
                         {"subject", subject},
                         {"train_records", r.train_records},
                         {"val_records", r.val_records},
                         {"subjects_used", r.subjects_used},
                         {"windows", r.windows_used},
                         {"best_epoch", r.train.best_epoch}};
      write_file_atomic(out / (safe(subject) + ".json"), summary.dump(2) + "\n");
    });
  }
}

json stage_loocv(const ExperimentConfig& cfg, bool dry_run, const Logger& log) {
  cfg.validate(true);
  const Corpus corpus = load_labelled_corpus(cfg);
  if (dry_run) {
    json plans = json::array();
    for (const auto& subject : selected_subjects(cfg, corpus)) {
      for (const auto& p : plan_subject(cfg, corpus, subject)) plans.push_back(p);
    }
    return json{{"config_hash", cfg.hash()}, {"folds", plans}};
  }

  json all = json::array();
  std::vector<SummaryRow> rows;
  for (const auto& [setup, model] : cfg.setups()) {
    const fs::path dir = setup_dir(cfg, setup);
    SecondSource from_disk;
    std::optional<ParamStore> pretrained;
    if (cfg.second_pretraining) {
      from_disk = [&, setup_dir_path = dir](const std::string& subject) -> std::optional<ParamStore> {
        const fs::path path = setup_dir_path / "second" / (safe(subject) + ".ckpt");
        if (!fs::exists(path)) {
          throw CheckpointError("second pretraining checkpoint missing: " + path.string());
        }
        Checkpoint ck = load_checkpoint(path);
        check_hash(ck, cfg, path);
        return std::move(ck.params);
      };
    } else {
      pretrained = pretrained_for(cfg, setup, model);
    }
    const ProtocolOutcome outcome =
        run_protocol(corpus, cfg, setup, model, pretrained ? &*pretrained : nullptr, log, from_disk);
    for (const auto& s : outcome.subjects) {
      for (const auto& f : s.folds) {
        write_file_atomic(dir / "folds" / (safe(s.subject_id) + "__" + safe(f.plan.test_record) + ".json"),
                          fold_json(f, cfg, setup).dump(2) + "\n");
        write_file_atomic(dir / "folds" / (safe(s.subject_id) + "__" + safe(f.plan.test_record) + "_loss.csv"),
                          curve_csv(f.train.curve));
      }
    }
    const json result = protocol_json(outcome, cfg, model);
    write_file_atomic(dir / "results.json", result.dump(2) + "\n");
    rows.insert(rows.end(), outcome.table.begin(), outcome.table.end());
    all.push_back(result);
  }
  write_file_atomic(fs::path(cfg.out_dir) / "summary.csv", summary_csv(rows));
  const json combined{{"config_hash", cfg.hash()}, {"setups", all}};
  write_file_atomic(fs::path(cfg.out_dir) / "results.json", combined.dump(2) + "\n");
  return combined;
}

void stage_all(const ExperimentConfig& cfg, const Logger& log) {
  const bool needs_pretrain = cfg.init != InitPolicy::Random && cfg.init_checkpoint.empty();
  if (needs_pretrain) stage_pretrain(cfg, log);
  if (cfg.second_pretraining) stage_second_pretrain(cfg, log);
  stage_loocv(cfg, false, log);
}

std::vector<SummaryRow> evaluate_predictions(const fs::path& predictions_dir, const PostConfig& post) {
  if (!fs::is_directory(predictions_dir)) {
    throw ConfigError("predictions directory not found: " + predictions_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(predictions_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<ScoredTrack>> by_setup;
  for (const auto& f : files) {
    json j;
    try {
      j = json::parse(read_file(f));
    } catch (const json::exception& e) {
      throw ConfigError("malformed prediction file " + f.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("probs")) continue;
    try {
      ScoredTrack t;
      t.subject_id = j.at("subject").get<std::string>();
      t.record_id = j.at("record").get<std::string>();
      t.window_s = j.at("window_s").get<double>();
      t.probs = j.at("probs").get<std::vector<double>>();
      t.truth_events = j.at("truth_events").get<std::vector<EventRange>>();
      by_setup[j.value("setup", std::string("default"))].push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ConfigError("malformed prediction file " + f.string() + ": " + e.what());
    }
  }
  if (by_setup.empty()) throw ConfigError("no prediction files under " + predictions_dir.string());
  std::vector<SummaryRow> rows;
  for (const auto& [setup, tracks] : by_setup) {
    auto r = summarize(setup, tracks, post);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

}  // namespace bendr
