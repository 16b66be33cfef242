#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bendr/recording.hpp"

namespace bendr {

inline constexpr double kDefaultThreshold = 0.5;

// Inclusive window-index range.
struct EventRange {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const EventRange&) const = default;
};

// p > threshold → 1.
std::vector<int> threshold_labels(const std::vector<double>& probs, double threshold = kDefaultThreshold);

// Sliding windows of odd width w centred on each position, edges replicated.
std::vector<int> smooth_majority(const std::vector<int>& labels, std::size_t w);
std::vector<int> smooth_minpool(const std::vector<int>& labels, std::size_t w);
std::vector<double> smooth_minpool(const std::vector<double>& probs, std::size_t w);

// Windows overlapping each interval (same ≥1-sample rule as segmentation);
// intervals landing on shared windows are merged into one event.
std::vector<EventRange> truth_events(const std::vector<SeizureInterval>& seizures, double window_s,
                                     std::uint32_t sample_rate_hz, std::size_t window_count);

// Maximal runs of consecutive positive windows.
std::vector<EventRange> positive_runs(const std::vector<int>& labels);

struct SensitivityResult {
  std::size_t detected = 0;
  std::size_t total = 0;
  std::optional<double> sensitivity;  // empty when there are no events
  std::vector<bool> detected_flags;
};

SensitivityResult event_sensitivity(const std::vector<int>& labels,
                                    const std::vector<EventRange>& events);

struct FalseAlarmResult {
  std::vector<EventRange> alarms;  // maximal runs of positive windows outside every event
  std::size_t false_positive_windows = 0;
  double duration_h = 0.0;
  double fp_per_h = 0.0;
  double fp_windows_per_h = 0.0;
};

FalseAlarmResult false_positives_per_hour(const std::vector<int>& labels,
                                          const std::vector<EventRange>& events, double window_s);

struct PredictionTrack {
  std::string record_id;
  double window_s = 8.0;
  std::vector<double> probs;
  double threshold = kDefaultThreshold;
  std::vector<int> labels;
  std::vector<EventRange> truth_events;

  void validate() const;
};

struct EventScore {
  std::size_t detected_events = 0;
  std::size_t total_events = 0;
  std::optional<double> sensitivity;
  std::size_t false_alarms = 0;
  std::size_t false_positive_windows = 0;
  double duration_h = 0.0;
  double fp_per_h = 0.0;
  std::vector<EventRange> alarms;
};

EventScore score_track(const PredictionTrack& track);

// Pooled: detected/total over records with events, alarms/hours over all.
EventScore aggregate(const std::vector<EventScore>& scores);

enum class PostMethod { None, Majority, MinPool, MajorityMinPool };
enum class PoolDomain { Labels, Probabilities };

PostMethod parse_post_method(const std::string& s);
std::string to_string(PostMethod m);
PoolDomain parse_pool_domain(const std::string& s);
std::string to_string(PoolDomain d);

struct PostSpec {
  PostMethod method = PostMethod::None;
  std::size_t w = 3;
  PoolDomain domain = PoolDomain::Labels;
  bool majority_first = true;  // order for MajorityMinPool
  double threshold = kDefaultThreshold;

  std::string name() const;  // e.g. "minpool_w3"
};

struct PostStages {
  std::vector<std::pair<std::string, std::vector<int>>> stages;  // "raw" first
  const std::vector<int>& final_labels() const { return stages.back().second; }
};

PostStages postprocess(const std::vector<double>& probs, const PostSpec& spec);

void to_json(nlohmann::json& j, const EventRange& r);
void from_json(const nlohmann::json& j, EventRange& r);
void to_json(nlohmann::json& j, const EventScore& s);

}  // namespace bendr
