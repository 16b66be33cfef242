#include "bendr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "bendr/errors.hpp"

namespace fs = std::filesystem;

namespace bendr {

std::vector<std::string> Corpus::subjects() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

std::vector<const RecordWindows*> Corpus::records_of(const std::string& subject) const {
  std::vector<const RecordWindows*> out;
  for (const auto& r : records) {
    if (r.subject_id == subject) out.push_back(&r);
  }
  return out;
}

const RecordWindows& Corpus::record(const std::string& record_id) const {
  for (const auto& r : records) {
    if (r.record_id == record_id) return r;
  }
  throw ProtocolError("record not in corpus: " + record_id);
}

bool Corpus::has_subject(const std::string& subject) const {
  return std::any_of(records.begin(), records.end(),
                     [&](const RecordWindows& r) { return r.subject_id == subject; });
}

WindowedDataset Corpus::windows_of(const std::vector<std::string>& record_ids) const {
  WindowedDataset out;
  for (const auto& id : record_ids) out.append(record(id).windows);
  return out;
}

WindowedDataset Corpus::all_windows() const {
  WindowedDataset out;
  for (const auto& r : records) out.append(r.windows);
  return out;
}

RecordWindows preprocess_record(const Recording& rec, const PreprocessOptions& opt) {
  rec.validate();
  RecordWindows out;
  out.subject_id = rec.subject_id;
  out.record_id = rec.record_id;
  out.duration_s = rec.duration_s();
  out.sample_rate_hz = rec.sample_rate_hz;
  out.seizures = rec.seizures;
  out.windows = preprocess_recording(rec, opt);
  return out;
}

Corpus build_corpus(const std::vector<Recording>& recordings, const PreprocessOptions& opt) {
  Corpus c;
  for (const auto& rec : recordings) c.records.push_back(preprocess_record(rec, opt));
  std::sort(c.records.begin(), c.records.end(), [](const RecordWindows& a, const RecordWindows& b) {
    return std::tie(a.subject_id, a.record_id) < std::tie(b.subject_id, b.record_id);
  });
  for (std::size_t i = 1; i < c.records.size(); ++i) {
    if (c.records[i].record_id == c.records[i - 1].record_id) {
      throw ProtocolError("duplicate record id " + c.records[i].record_id);
    }
  }
  return c;
}

std::vector<Recording> read_corpus_recordings(const fs::path& dir,
                                              const std::vector<std::string>& montage) {
  if (!fs::is_directory(dir)) throw ConfigError("corpus directory not found: " + dir.string());
  AnnotationTable table;
  const fs::path ann = dir / "annotations.csv";
  if (fs::exists(ann)) {
    std::ifstream in(ann);
    std::stringstream ss;
    ss << in.rdbuf();
    table = load_annotations(ss.str());
  }

  std::vector<fs::path> subject_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subject_dirs.push_back(e.path());
  }
  std::sort(subject_dirs.begin(), subject_dirs.end());

  std::vector<Recording> out;
  for (const auto& sd : subject_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sd)) {
      if (e.is_regular_file() && e.path().extension() == ".edf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Recording rec = read_edf_file(f.string());
      rec.subject_id = sd.filename().string();
      rec.record_id = f.stem().string();
      if (!montage.empty()) rec = select_channels(rec, montage);
      if (auto it = table.find(rec.record_id); it != table.end()) rec.seizures = it->second;
      rec.validate();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

Corpus load_corpus(const fs::path& dir, const std::vector<std::string>& montage,
                   const PreprocessOptions& opt) {
  Corpus c;
  for (const auto& rec : read_corpus_recordings(dir, montage)) {
    c.records.push_back(preprocess_record(rec, opt));
  }
  std::sort(c.records.begin(), c.records.end(), [](const RecordWindows& a, const RecordWindows& b) {
    return std::tie(a.subject_id, a.record_id) < std::tie(b.subject_id, b.record_id);
  });
  return c;
}

}  // namespace bendr
