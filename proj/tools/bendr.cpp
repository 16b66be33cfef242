#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bendr/errors.hpp"
#include "bendr/experiment.hpp"
#include "bendr/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_line(const std::string& msg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%H:%M:%S", std::localtime(&now));
  std::cerr << '[' << stamp << "] " << msg << std::endl;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--jobs", c.jobs, "Subjects processed in parallel")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Override the output directory");
  cmd->add_flag("--dry-run", c.dry_run, "Validate and print the plan without training");
}

bendr::ExperimentConfig resolve(const Common& c) {
  bendr::ExperimentConfig cfg = bendr::load_experiment_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.out) cfg.out_dir = *c.out;
  return cfg;
}

int dry_run(const bendr::ExperimentConfig& cfg, const std::string& stage) {
  cfg.validate(true);
  json plan{{"stage", stage}, {"config_hash", cfg.hash()}, {"out_dir", cfg.out_dir}};
  json setups = json::array();
  for (const auto& [name, model] : cfg.setups()) setups.push_back({{"setup", name}, {"model", model}});
  plan["setups"] = setups;
  if (stage == "loocv" || stage == "run") {
    plan["folds"] = bendr::stage_loocv(cfg, true, {}).at("folds");
  }
  std::cout << plan.dump(2) << '\n';
  return 0;
}

int run(CLI::App& app, int argc, char** argv) {
  app.require_subcommand(1);

  std::string spec_path;
  std::string synth_out = "corpus";
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic EDF corpus");
  synth->add_option("--config,--spec", spec_path, "Corpus spec (JSON); defaults apply when omitted")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", synth_seed, "Override the spec seed");

  Common pre, second, loocv, all;
  auto* c_pre = app.add_subcommand("pretrain", "Masked contrastive pretraining");
  add_common(c_pre, pre);
  auto* c_second = app.add_subcommand("second-pretrain", "Supervised pretraining on all but the target subject");
  add_common(c_second, second);
  auto* c_loocv = app.add_subcommand("loocv", "Subject-specific leave-one-record-out fine-tuning");
  add_common(c_loocv, loocv);
  auto* c_all = app.add_subcommand("run", "pretrain, second-pretrain and loocv in sequence");
  add_common(c_all, all);

  std::string predictions;
  std::vector<std::string> methods{"none", "majority", "minpool", "majority+minpool"};
  std::vector<std::size_t> widths{3, 5, 7};
  std::string domain = "labels";
  std::string order = "majority_first";
  double threshold = bendr::kDefaultThreshold;
  std::string eval_out;
  auto* c_eval = app.add_subcommand("eval", "Score stored predictions under post-processing variants");
  c_eval->add_option("predictions", predictions, "Directory of fold result JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_eval->add_option("--method", methods, "none, majority, minpool, majority+minpool");
  c_eval->add_option("--w", widths, "Odd smoothing widths");
  c_eval->add_option("--domain", domain, "minPooling domain: labels or probabilities");
  c_eval->add_option("--order", order, "majority_first or minpool_first");
  c_eval->add_option("--threshold", threshold, "Probability threshold");
  c_eval->add_option("--out", eval_out, "Directory for summary.csv and eval.json (default: stdout)");

  app.parse(argc, argv);

  if (synth->parsed()) {
    bendr::CorpusSpec spec;
    if (!spec_path.empty()) {
      try {
        spec = json::parse(bendr::read_file(spec_path)).get<bendr::CorpusSpec>();
      } catch (const json::exception& e) {
        throw bendr::ConfigError("malformed corpus spec: " + std::string(e.what()));
      }
    }
    if (synth_seed) spec.seed = *synth_seed;
    const json manifest = bendr::generate_corpus(spec, synth_out);
    log_line("wrote " + std::to_string(manifest.at("records").size()) + " records to " + synth_out +
             " (spec " + manifest.at("spec_hash").get<std::string>() + ")");
    return 0;
  }
  if (c_pre->parsed()) {
    const auto cfg = resolve(pre);
    if (pre.dry_run) return dry_run(cfg, "pretrain");
    bendr::stage_pretrain(cfg, log_line);
    return 0;
  }
  if (c_second->parsed()) {
    const auto cfg = resolve(second);
    if (second.dry_run) return dry_run(cfg, "second-pretrain");
    bendr::stage_second_pretrain(cfg, log_line);
    return 0;
  }
  if (c_loocv->parsed()) {
    const auto cfg = resolve(loocv);
    if (loocv.dry_run) return dry_run(cfg, "loocv");
    bendr::stage_loocv(cfg, false, log_line);
    std::cout << bendr::read_file(fs::path(cfg.out_dir) / "summary.csv");
    return 0;
  }
  if (c_all->parsed()) {
    const auto cfg = resolve(all);
    if (all.dry_run) return dry_run(cfg, "run");
    bendr::stage_all(cfg, log_line);
    std::cout << bendr::read_file(fs::path(cfg.out_dir) / "summary.csv");
    return 0;
  }
  if (c_eval->parsed()) {
    bendr::PostConfig post;
    post.methods.clear();
    for (const auto& m : methods) post.methods.push_back(bendr::parse_post_method(m));
    post.windows = widths;
    for (std::size_t w : widths) {
      if (w == 0 || w % 2 == 0) throw bendr::ConfigError("smoothing widths must be odd");
    }
    post.domain = bendr::parse_pool_domain(domain);
    if (order != "majority_first" && order != "minpool_first") {
      throw bendr::ConfigError("--order must be majority_first or minpool_first");
    }
    post.majority_first = order == "majority_first";
    post.threshold = threshold;
    const auto rows = bendr::evaluate_predictions(predictions, post);
    const std::string csv = bendr::summary_csv(rows);
    if (eval_out.empty()) {
      std::cout << csv;
    } else {
      bendr::write_file_atomic(fs::path(eval_out) / "summary.csv", csv);
      bendr::write_file_atomic(fs::path(eval_out) / "eval.json",
                               json{{"post", post}, {"table", bendr::summary_json(rows)}}.dump(2) + "\n");
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seizure detection with a pretrained EEG transformer"};
  try {
    return run(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const bendr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const bendr::SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return 2;
  } catch (const bendr::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return 2;
  } catch (const bendr::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const bendr::SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << '\n';
    return 3;
  } catch (const bendr::TrainError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return 4;
  } catch (const bendr::NumericsError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const bendr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << '\n';
    return 1;
  }
}
