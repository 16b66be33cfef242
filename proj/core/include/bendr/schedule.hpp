#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <json.hpp>

namespace bendr {

struct ScheduleSpec {
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 5;
  std::size_t early_stop_patience = 15;

  void validate() const;
};

void to_json(nlohmann::json& j, const ScheduleSpec& s);
void from_json(const nlohmann::json& j, ScheduleSpec& s);

enum class ScheduleDecision { Continue, ReduceLr, Stop };

// Reduce-on-plateau plus early stopping on a monitored loss. Only a strict
// improvement over the best value resets the counters; a reduction resets the
// plateau counter only.
class PlateauTracker {
 public:
  explicit PlateauTracker(ScheduleSpec spec);

  ScheduleDecision observe(double loss);

  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any observation
  std::size_t epochs() const { return epochs_; }
  std::size_t reductions() const { return reductions_; }
  bool improved_last() const { return improved_last_; }

 private:
  ScheduleSpec spec_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epochs_ = 0;
  std::size_t since_best_ = 0;
  std::size_t since_reduction_ = 0;
  std::size_t reductions_ = 0;
  bool improved_last_ = false;
};

// Decision after the last entry of `history` (replays a fresh tracker).
ScheduleDecision plateau_and_early_stop(const std::vector<double>& history, const ScheduleSpec& spec);

}  // namespace bendr
