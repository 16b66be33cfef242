#include "metric_oracle.hpp"

namespace bendr::testing {

OracleScore oracle_score(const std::vector<int>& labels, const std::vector<EventRange>& events,
                         double window_s) {
  const std::size_t n = labels.size();
  OracleScore s;
  s.total = events.size();
  for (const EventRange& e : events) {
    bool hit = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= e.first && i <= e.last && labels[i] == 1) hit = true;
    }
    s.detected_flags.push_back(hit);
    if (hit) ++s.detected;
  }

  auto in_event = [&](std::size_t i) {
    for (const EventRange& e : events) {
      if (i >= e.first && i <= e.last) return true;
    }
    return false;
  };

  auto false_pos = [&](std::size_t i) { return labels[i] == 1 && !in_event(i); };

  // Every maximal interval [a, b] of false-positive windows, by exhaustive enumeration.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      bool all_fp = true;
      for (std::size_t i = a; i <= b; ++i) all_fp = all_fp && false_pos(i);
      if (!all_fp) continue;
      const bool left_closed = a == 0 || !false_pos(a - 1);
      const bool right_closed = b + 1 == n || !false_pos(b + 1);
      if (left_closed && right_closed) s.alarms.push_back({a, b});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1 && !in_event(i)) ++s.false_positive_windows;
  }
  const double hours = static_cast<double>(n) * window_s / 3600.0;
  s.fp_per_h = static_cast<double>(s.alarms.size()) / hours;
  return s;
}

RandomTrack random_track(Rng& rng, std::size_t max_len) {
  RandomTrack t;
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_len));
  const double density = rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rng.uniform();
    t.probs.push_back(p < density ? 0.5 + 0.5 * rng.uniform() : 0.5 * rng.uniform());
    t.labels.push_back(t.probs.back() > 0.5 ? 1 : 0);
  }
  std::size_t pos = static_cast<std::size_t>(rng.below(4));
  while (pos < n && rng.uniform() < 0.7) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(8));
    const std::size_t last = std::min(n - 1, pos + len - 1);
    t.events.push_back({pos, last});
    pos = last + 2 + static_cast<std::size_t>(rng.below(10));
  }
  return t;
}

}  // namespace bendr::testing
