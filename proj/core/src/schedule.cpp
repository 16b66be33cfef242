#include "bendr/schedule.hpp"

#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

void ScheduleSpec::validate() const {
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ConfigError("plateau factor must lie in (0, 1)");
  }
  if (plateau_patience < 1 || early_stop_patience < 1) throw ConfigError("patiences must be >= 1");
}

void to_json(nlohmann::json& j, const ScheduleSpec& s) {
  j = nlohmann::json{{"plateau_factor", s.plateau_factor},
                     {"plateau_patience", s.plateau_patience},
                     {"early_stop_patience", s.early_stop_patience}};
}

void from_json(const nlohmann::json& j, ScheduleSpec& s) {
  ScheduleSpec d;
  s.plateau_factor = j.value("plateau_factor", d.plateau_factor);
  s.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  s.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
}

PlateauTracker::PlateauTracker(ScheduleSpec spec) : spec_(spec) { spec_.validate(); }

ScheduleDecision PlateauTracker::observe(double loss) {
  ++epochs_;
  improved_last_ = loss < best_;
  if (improved_last_) {
    best_ = loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
    since_reduction_ = 0;
    return ScheduleDecision::Continue;
  }
  ++since_best_;
  ++since_reduction_;
  if (since_best_ >= spec_.early_stop_patience) return ScheduleDecision::Stop;
  if (since_reduction_ >= spec_.plateau_patience) {
    since_reduction_ = 0;
    ++reductions_;
    return ScheduleDecision::ReduceLr;
  }
  return ScheduleDecision::Continue;
}

ScheduleDecision plateau_and_early_stop(const std::vector<double>& history, const ScheduleSpec& spec) {
  if (history.empty()) throw ConfigError("plateau_and_early_stop needs a non-empty history");
  PlateauTracker t(spec);
  ScheduleDecision d = ScheduleDecision::Continue;
  for (double v : history) d = t.observe(v);
  return d;
}

}  // namespace bendr
