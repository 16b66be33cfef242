#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bendr/preprocess.hpp"
#include "bendr/recording.hpp"

namespace bendr {

// One pre-processed record: its windows plus what scoring needs.
struct RecordWindows {
  std::string subject_id;
  std::string record_id;
  double duration_s = 0.0;
  std::uint32_t sample_rate_hz = 256;
  std::vector<SeizureInterval> seizures;
  WindowedDataset windows;

  bool has_seizures() const { return !seizures.empty(); }
};

struct Corpus {
  std::vector<RecordWindows> records;  // sorted by (subject, record)

  std::vector<std::string> subjects() const;
  std::vector<const RecordWindows*> records_of(const std::string& subject) const;
  const RecordWindows& record(const std::string& record_id) const;
  bool has_subject(const std::string& subject) const;

  // Every window of the given records, in record order.
  WindowedDataset windows_of(const std::vector<std::string>& record_ids) const;
  WindowedDataset all_windows() const;
};

RecordWindows preprocess_record(const Recording& rec, const PreprocessOptions& opt);
Corpus build_corpus(const std::vector<Recording>& recordings, const PreprocessOptions& opt);

// Reads `<dir>/<subject>/<record>.edf` plus `<dir>/annotations.csv` (optional).
// Subject ids are directory names and record ids file stems. An empty montage
// keeps every channel.
std::vector<Recording> read_corpus_recordings(const std::filesystem::path& dir,
                                              const std::vector<std::string>& montage);
Corpus load_corpus(const std::filesystem::path& dir, const std::vector<std::string>& montage,
                   const PreprocessOptions& opt);

}  // namespace bendr
