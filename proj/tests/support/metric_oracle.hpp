#pragma once

#include <cstddef>
#include <vector>

#include "bendr/evalpost.hpp"
#include "bendr/rng.hpp"

namespace bendr::testing {

// Scan-everything re-implementations of the event metrics. They share no code
// with evalpost and favour obviousness over speed.
struct OracleScore {
  std::size_t detected = 0;
  std::size_t total = 0;
  std::vector<bool> detected_flags;
  std::vector<EventRange> alarms;
  std::size_t false_positive_windows = 0;
  double fp_per_h = 0.0;
};

OracleScore oracle_score(const std::vector<int>& labels, const std::vector<EventRange>& events,
                         double window_s);

struct RandomTrack {
  std::vector<int> labels;
  std::vector<double> probs;
  std::vector<EventRange> events;  // disjoint, sorted, within bounds
};

// Length in [1, max_len]; events disjoint with at least one gap window.
RandomTrack random_track(Rng& rng, std::size_t max_len = 64);

}  // namespace bendr::testing
