#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bendr/recording.hpp"
#include "bendr/rng.hpp"

namespace bendr {

struct CorpusSpec {
  std::size_t subjects = 3;
  std::size_t records_per_subject = 4;
  double record_s = 256.0;
  std::size_t seizures_per_record = 1;
  double seizure_min_s = 24.0;
  double seizure_max_s = 48.0;
  double align_s = 8.0;    // seizure starts and lengths are multiples of this
  double min_gap_s = 8.0;  // between seizures and from the record edges
  double background_uv = 20.0;  // RMS of the pink background
  double seizure_gain = 4.0;    // burst amplitude relative to the background RMS
  double freq_min_hz = 3.0;
  double freq_max_hz = 12.0;
  std::uint32_t sample_rate_hz = 256;
  std::size_t channels = 20;
  std::uint64_t seed = 1;

  void validate() const;
  std::string hash() const;
};

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);

std::vector<std::string> default_montage(std::size_t channels = 20);

// Per-subject burst signature.
struct SeizureSignature {
  double freq_hz = 0.0;
  double am_hz = 0.0;
  std::vector<double> channel_gain;
  std::vector<double> channel_phase;
};

SeizureSignature subject_signature(const CorpusSpec& spec, std::size_t subject);

std::string subject_name(std::size_t subject);
std::string record_name(std::size_t subject, std::size_t record);

// Seizure intervals for one record. Throws SpecError when they cannot fit.
std::vector<SeizureInterval> place_seizures(const CorpusSpec& spec, Rng& rng);

// Pink background plus the subject's bursts inside each placed interval. With
// `with_seizures` false, the same background is returned with no bursts and
// no annotations (used as a spectral reference).
Recording generate_recording(const CorpusSpec& spec, std::size_t subject, std::size_t record,
                             bool with_seizures = true);

std::vector<Recording> generate_recordings(const CorpusSpec& spec);

// Writes `<dir>/<subject>/<record>.edf`, `<dir>/annotations.csv` and
// `<dir>/manifest.json`; returns the manifest.
nlohmann::json generate_corpus(const CorpusSpec& spec, const std::filesystem::path& dir);

// Re-runs generation from a manifest's embedded spec.
nlohmann::json regenerate_corpus(const std::filesystem::path& manifest,
                                 const std::filesystem::path& dir);

// Mean periodogram power of `x` within [lo_hz, hi_hz].
double band_power(const std::vector<double>& x, double sample_rate_hz, double lo_hz, double hi_hz);

}  // namespace bendr
