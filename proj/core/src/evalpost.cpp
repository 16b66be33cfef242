#include "bendr/evalpost.hpp"

#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

namespace {

void check_width(std::size_t w) {
  if (w == 0 || w % 2 == 0) {
    throw ConfigError("smoothing width must be odd, got " + std::to_string(w));
  }
}

template <typename T, typename Reduce>
std::vector<T> slide(const std::vector<T>& x, std::size_t w, Reduce reduce) {
  check_width(w);
  const std::size_t n = x.size();
  const auto half = static_cast<std::ptrdiff_t>(w / 2);
  std::vector<T> out(n);
  std::vector<T> buf(w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t j =
          std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) + k, 0,
                                     static_cast<std::ptrdiff_t>(n) - 1);
      buf[static_cast<std::size_t>(k + half)] = x[static_cast<std::size_t>(j)];
    }
    out[i] = reduce(buf);
  }
  return out;
}

bool overlaps(const EventRange& a, const EventRange& b) {
  return a.first <= b.last && b.first <= a.last;
}

}  // namespace

std::vector<int> threshold_labels(const std::vector<double>& probs, double threshold) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > threshold ? 1 : 0;
  return out;
}

std::vector<int> smooth_majority(const std::vector<int>& labels, std::size_t w) {
  return slide(labels, w, [](const std::vector<int>& b) {
    const auto ones = std::count(b.begin(), b.end(), 1);
    return 2 * static_cast<std::size_t>(ones) > b.size() ? 1 : 0;
  });
}

std::vector<int> smooth_minpool(const std::vector<int>& labels, std::size_t w) {
  return slide(labels, w, [](const std::vector<int>& b) { return *std::min_element(b.begin(), b.end()); });
}

std::vector<double> smooth_minpool(const std::vector<double>& probs, std::size_t w) {
  return slide(probs, w, [](const std::vector<double>& b) { return *std::min_element(b.begin(), b.end()); });
}

std::vector<EventRange> truth_events(const std::vector<SeizureInterval>& seizures, double window_s,
                                     std::uint32_t sample_rate_hz, std::size_t window_count) {
  const auto t = static_cast<std::size_t>(std::llround(window_s * sample_rate_hz));
  if (t == 0) throw ConfigError("window shorter than one sample");
  std::vector<EventRange> out;
  for (const auto& iv : merge_intervals(seizures)) {
    const auto [s0, s1] = interval_samples(iv, sample_rate_hz);
    if (s1 <= s0) continue;
    const std::size_t first = s0 / t;
    if (first >= window_count) continue;
    const std::size_t last = std::min((s1 - 1) / t, window_count - 1);
    if (!out.empty() && first <= out.back().last) {
      out.back().last = std::max(out.back().last, last);
    } else {
      out.push_back({first, last});
    }
  }
  return out;
}

std::vector<EventRange> positive_runs(const std::vector<int>& labels) {
  std::vector<EventRange> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    if (!out.empty() && out.back().last + 1 == i) {
      out.back().last = i;
    } else {
      out.push_back({i, i});
    }
  }
  return out;
}

SensitivityResult event_sensitivity(const std::vector<int>& labels,
                                    const std::vector<EventRange>& events) {
  SensitivityResult r;
  r.total = events.size();
  for (const auto& e : events) {
    bool hit = false;
    for (std::size_t i = e.first; i <= e.last && i < labels.size(); ++i) {
      if (labels[i] == 1) {
        hit = true;
        break;
      }
    }
    r.detected_flags.push_back(hit);
    r.detected += hit;
  }
  if (r.total > 0) r.sensitivity = static_cast<double>(r.detected) / static_cast<double>(r.total);
  return r;
}

FalseAlarmResult false_positives_per_hour(const std::vector<int>& labels,
                                          const std::vector<EventRange>& events, double window_s) {
  FalseAlarmResult r;
  r.duration_h = static_cast<double>(labels.size()) * window_s / 3600.0;
  if (!(r.duration_h > 0.0)) throw MetricError("false alarm rate needs a positive duration");
  // An alarm is a maximal run of positive windows lying outside every event.
  std::vector<int> false_pos(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    const bool inside = std::any_of(events.begin(), events.end(),
                                    [&](const EventRange& e) { return e.first <= i && i <= e.last; });
    false_pos[i] = !inside;
    r.false_positive_windows += !inside;
  }
  r.alarms = positive_runs(false_pos);
  r.fp_per_h = static_cast<double>(r.alarms.size()) / r.duration_h;
  r.fp_windows_per_h = static_cast<double>(r.false_positive_windows) / r.duration_h;
  return r;
}

void PredictionTrack::validate() const {
  if (probs.size() != labels.size()) {
    throw MetricError("track " + record_id + ": probabilities and labels differ in length");
  }
  for (std::size_t i = 0; i < truth_events.size(); ++i) {
    const auto& e = truth_events[i];
    if (e.first > e.last || e.last >= labels.size()) {
      throw MetricError("track " + record_id + ": truth event out of bounds");
    }
    if (i > 0 && e.first <= truth_events[i - 1].last) {
      throw MetricError("track " + record_id + ": truth events overlap");
    }
  }
}

EventScore score_track(const PredictionTrack& track) {
  track.validate();
  const auto sens = event_sensitivity(track.labels, track.truth_events);
  const auto fa = false_positives_per_hour(track.labels, track.truth_events, track.window_s);
  EventScore s;
  s.detected_events = sens.detected;
  s.total_events = sens.total;
  s.sensitivity = sens.sensitivity;
  s.false_alarms = fa.alarms.size();
  s.false_positive_windows = fa.false_positive_windows;
  s.duration_h = fa.duration_h;
  s.fp_per_h = fa.fp_per_h;
  s.alarms = fa.alarms;
  return s;
}

EventScore aggregate(const std::vector<EventScore>& scores) {
  if (scores.empty()) throw MetricError("nothing to aggregate");
  EventScore out;
  for (const auto& s : scores) {
    out.detected_events += s.detected_events;
    out.total_events += s.total_events;
    out.false_alarms += s.false_alarms;
    out.false_positive_windows += s.false_positive_windows;
    out.duration_h += s.duration_h;
  }
  if (out.total_events > 0) {
    out.sensitivity = static_cast<double>(out.detected_events) / static_cast<double>(out.total_events);
  }
  if (out.duration_h > 0.0) out.fp_per_h = static_cast<double>(out.false_alarms) / out.duration_h;
  if (scores.size() == 1) out.alarms = scores.front().alarms;
  return out;
}

PostMethod parse_post_method(const std::string& s) {
  const std::string k = normalize_label(s);
  if (k == "NONE" || k == "RAW") return PostMethod::None;
  if (k == "MAJORITY") return PostMethod::Majority;
  if (k == "MINPOOL" || k == "MINPOOLING") return PostMethod::MinPool;
  if (k == "MAJORITY+MINPOOL" || k == "MAJORITY_MINPOOL" || k == "BOTH") {
    return PostMethod::MajorityMinPool;
  }
  throw ConfigError("unknown post-processing method '" + s + "'");
}

std::string to_string(PostMethod m) {
  switch (m) {
    case PostMethod::None: return "none";
    case PostMethod::Majority: return "majority";
    case PostMethod::MinPool: return "minpool";
    case PostMethod::MajorityMinPool: return "majority+minpool";
  }
  return "?";
}

PoolDomain parse_pool_domain(const std::string& s) {
  const std::string k = normalize_label(s);
  if (k == "LABELS" || k == "LABEL") return PoolDomain::Labels;
  if (k == "PROBABILITIES" || k == "PROBS" || k == "PROBABILITY") return PoolDomain::Probabilities;
  throw ConfigError("unknown pooling domain '" + s + "'");
}

std::string to_string(PoolDomain d) {
  return d == PoolDomain::Labels ? "labels" : "probabilities";
}

std::string PostSpec::name() const {
  if (method == PostMethod::None) return "none";
  return to_string(method) + "_w" + std::to_string(w);
}

PostStages postprocess(const std::vector<double>& probs, const PostSpec& spec) {
  PostStages out;
  const bool pool_probs = spec.domain == PoolDomain::Probabilities;
  auto pool = [&](std::vector<int> current, bool probs_still_available) {
    if (pool_probs && probs_still_available) {
      return threshold_labels(smooth_minpool(probs, spec.w), spec.threshold);
    }
    return smooth_minpool(current, spec.w);
  };

  out.stages.emplace_back("raw", threshold_labels(probs, spec.threshold));
  switch (spec.method) {
    case PostMethod::None:
      break;
    case PostMethod::Majority:
      out.stages.emplace_back("majority", smooth_majority(out.final_labels(), spec.w));
      break;
    case PostMethod::MinPool:
      out.stages.emplace_back("minpool", pool(out.final_labels(), true));
      break;
    case PostMethod::MajorityMinPool:
      if (spec.majority_first) {
        out.stages.emplace_back("majority", smooth_majority(out.final_labels(), spec.w));
        out.stages.emplace_back("minpool", pool(out.final_labels(), false));
      } else {
        out.stages.emplace_back("minpool", pool(out.final_labels(), true));
        out.stages.emplace_back("majority", smooth_majority(out.final_labels(), spec.w));
      }
      break;
  }
  return out;
}

void to_json(nlohmann::json& j, const EventRange& r) { j = nlohmann::json::array({r.first, r.last}); }

void from_json(const nlohmann::json& j, EventRange& r) {
  r.first = j.at(0).get<std::size_t>();
  r.last = j.at(1).get<std::size_t>();
}

void to_json(nlohmann::json& j, const EventScore& s) {
  j = nlohmann::json{{"detected_events", s.detected_events},
                     {"total_events", s.total_events},
                     {"sensitivity", s.sensitivity ? nlohmann::json(*s.sensitivity) : nlohmann::json()},
                     {"false_alarms", s.false_alarms},
                     {"false_positive_windows", s.false_positive_windows},
                     {"duration_h", s.duration_h},
                     {"fp_per_h", s.fp_per_h},
                     {"alarms", s.alarms}};
}

}  // namespace bendr
