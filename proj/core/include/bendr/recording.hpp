#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bendr/tensor.hpp"

namespace bendr {

struct SeizureInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const SeizureInterval&) const = default;
};

struct Recording {
  std::string subject_id;
  std::string record_id;
  std::uint32_t sample_rate_hz = 256;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> samples;  // one sequence per channel
  std::vector<SeizureInterval> seizures;

  std::size_t sample_count() const { return samples.empty() ? 0 : samples.front().size(); }
  double duration_s() const {
    return static_cast<double>(sample_count()) / static_cast<double>(sample_rate_hz);
  }

  // Throws SignalError / AnnotationError on violated invariants.
  void validate() const;
};

// A fixed-length labelled slice of one recording.
struct Window {
  std::string subject_id;
  std::string record_id;
  std::size_t index = 0;
  Tensor data;  // C×T
  int label = 0;
};

struct WindowedDataset {
  std::vector<Window> windows;
  double window_s = 8.0;
  std::size_t channel_count = 0;
  std::size_t samples_per_window = 0;

  std::size_t size() const { return windows.size(); }
  std::size_t positives() const;
  void append(const WindowedDataset& other);
};

// Case-insensitive, whitespace-stripped label match; result follows `wanted`.
Recording select_channels(const Recording& rec, const std::vector<std::string>& wanted);

// Window i covers samples [i·step, i·step + T). A window is positive iff it
// shares at least one sample with a seizure interval. Trailing partial
// windows are dropped.
WindowedDataset segment_windows(const Recording& rec, double window_s, double overlap_s = 0.0);

// Sample index range [first, last) covered by an interval at the given rate.
std::pair<std::size_t, std::size_t> interval_samples(const SeizureInterval& iv,
                                                     std::uint32_t sample_rate_hz);

// ---- EDF --------------------------------------------------------------------

// Parses the plain-EDF subset: one sampling rate, continuous records, no
// in-band annotation signal. Subject/record ids default to the header's
// patient/recording fields.
Recording parse_edf(std::string_view bytes);
std::string write_edf(const Recording& rec);

Recording read_edf_file(const std::string& path);
void write_edf_file(const std::string& path, const Recording& rec);

// ---- annotations ------------------------------------------------------------

using AnnotationTable = std::map<std::string, std::vector<SeizureInterval>>;

// Lines `record_id,start_s,end_s`; '#' starts a comment. Intervals are sorted
// and overlapping ones merged per record.
AnnotationTable load_annotations(std::string_view text);
std::string format_annotations(const AnnotationTable& table);

// Sort and merge intervals that overlap or touch.
std::vector<SeizureInterval> merge_intervals(std::vector<SeizureInterval> intervals);

std::string normalize_label(std::string_view label);

}  // namespace bendr
