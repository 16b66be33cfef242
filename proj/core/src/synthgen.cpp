#include "bendr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "bendr/checkpoint.hpp"
#include "bendr/errors.hpp"

namespace fs = std::filesystem;

namespace bendr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Rng root(const CorpusSpec& spec) { return Rng(spec.seed); }

Rng record_stream(const CorpusSpec& spec, std::size_t subject, std::size_t record) {
  return root(spec).derive("record").derive(subject).derive(record);
}

// Kellet's refined pink filter over white normal noise.
std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace

void CorpusSpec::validate() const {
  if (sample_rate_hz == 0) throw SpecError("sample rate must be positive");
  if (!(record_s > 0.0)) throw SpecError("record length must be positive");
  const double samples = record_s * sample_rate_hz;
  if (std::abs(record_s - std::round(record_s)) > 1e-9) {
    throw SpecError("record length must be a whole number of seconds");
  }
  if (samples < 1.0) throw SpecError("record shorter than one sample");
  if (channels == 0) throw SpecError("at least one channel required");
  if (!(align_s > 0.0)) throw SpecError("align_s must be positive");
  if (min_gap_s < 0.0) throw SpecError("min_gap_s must be non-negative");
  if (!(seizure_min_s > 0.0 && seizure_min_s <= seizure_max_s)) {
    throw SpecError("seizure length range must satisfy 0 < min <= max");
  }
  if (!(background_uv > 0.0)) throw SpecError("background amplitude must be positive");
  if (!(seizure_gain > 0.0)) throw SpecError("seizure gain must be positive");
  if (!(freq_min_hz > 0.0 && freq_min_hz <= freq_max_hz && freq_max_hz < sample_rate_hz / 2.0)) {
    throw SpecError("seizure frequency range must lie in (0, Nyquist)");
  }
}

std::string CorpusSpec::hash() const { return config_hash(nlohmann::json(*this)); }

void to_json(nlohmann::json& j, const CorpusSpec& s) {
  j = nlohmann::json{{"subjects", s.subjects},
                     {"records_per_subject", s.records_per_subject},
                     {"record_s", s.record_s},
                     {"seizures_per_record", s.seizures_per_record},
                     {"seizure_min_s", s.seizure_min_s},
                     {"seizure_max_s", s.seizure_max_s},
                     {"align_s", s.align_s},
                     {"min_gap_s", s.min_gap_s},
                     {"background_uv", s.background_uv},
                     {"seizure_gain", s.seizure_gain},
                     {"freq_min_hz", s.freq_min_hz},
                     {"freq_max_hz", s.freq_max_hz},
                     {"sample_rate_hz", s.sample_rate_hz},
                     {"channels", s.channels},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, CorpusSpec& s) {
  CorpusSpec d;
  s.subjects = j.value("subjects", d.subjects);
  s.records_per_subject = j.value("records_per_subject", d.records_per_subject);
  s.record_s = j.value("record_s", d.record_s);
  s.seizures_per_record = j.value("seizures_per_record", d.seizures_per_record);
  s.seizure_min_s = j.value("seizure_min_s", d.seizure_min_s);
  s.seizure_max_s = j.value("seizure_max_s", d.seizure_max_s);
  s.align_s = j.value("align_s", d.align_s);
  s.min_gap_s = j.value("min_gap_s", d.min_gap_s);
  s.background_uv = j.value("background_uv", d.background_uv);
  s.seizure_gain = j.value("seizure_gain", d.seizure_gain);
  s.freq_min_hz = j.value("freq_min_hz", d.freq_min_hz);
  s.freq_max_hz = j.value("freq_max_hz", d.freq_max_hz);
  s.sample_rate_hz = j.value("sample_rate_hz", d.sample_rate_hz);
  s.channels = j.value("channels", d.channels);
  s.seed = j.value("seed", d.seed);
}

std::vector<std::string> default_montage(std::size_t channels) {
  static const std::vector<std::string> bipolar = {
      "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3",  "C3-P3",  "P3-O1",  "FP2-F4", "F4-C4",
      "C4-P4",  "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ", "P7-T7", "T7-FT9"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < channels; ++c) {
    out.push_back(c < bipolar.size() ? bipolar[c] : "CH" + std::to_string(c + 1));
  }
  return out;
}

SeizureSignature subject_signature(const CorpusSpec& spec, std::size_t subject) {
  Rng rng = root(spec).derive("signature").derive(subject);
  SeizureSignature sig;
  sig.freq_hz = rng.uniform(spec.freq_min_hz, spec.freq_max_hz);
  sig.am_hz = rng.uniform(0.2, 0.6);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    sig.channel_gain.push_back(rng.uniform(0.75, 1.0));
    sig.channel_phase.push_back(rng.uniform(0.0, kTwoPi));
  }
  return sig;
}

std::string subject_name(std::size_t subject) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "sub%02zu", subject + 1);
  return buf;
}

std::string record_name(std::size_t subject, std::size_t record) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_r%02zu", record + 1);
  return subject_name(subject) + buf;
}

std::vector<SeizureInterval> place_seizures(const CorpusSpec& spec, Rng& rng) {
  const std::size_t n = spec.seizures_per_record;
  if (n == 0) return {};
  const double unit = spec.align_s;
  const auto total_units = static_cast<std::size_t>(std::floor(spec.record_s / unit + 1e-9));
  const auto gap_units = static_cast<std::size_t>(std::ceil(spec.min_gap_s / unit - 1e-9));

  std::vector<std::size_t> len(n);
  std::size_t needed = (n + 1) * gap_units;
  for (auto& l : len) {
    l = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(rng.uniform(spec.seizure_min_s, spec.seizure_max_s) / unit)));
    needed += l;
  }
  if (needed > total_units) {
    throw SpecError(std::to_string(n) + " seizures with gaps need " + std::to_string(needed * unit) +
                    " s but the record lasts " + std::to_string(spec.record_s) + " s");
  }
  // Spread the slack over the n+1 gaps.
  const std::size_t extra = total_units - needed;
  std::vector<std::size_t> cuts(n);
  for (auto& c : cuts) c = static_cast<std::size_t>(rng.below(extra + 1));
  std::sort(cuts.begin(), cuts.end());

  std::vector<SeizureInterval> out;
  std::size_t pos = 0;
  std::size_t prev_cut = 0;
  for (std::size_t i = 0; i < n; ++i) {
    pos += gap_units + (cuts[i] - prev_cut);
    prev_cut = cuts[i];
    out.push_back({static_cast<double>(pos) * unit, static_cast<double>(pos + len[i]) * unit});
    pos += len[i];
  }
  return out;
}

Recording generate_recording(const CorpusSpec& spec, std::size_t subject, std::size_t record,
                             bool with_seizures) {
  spec.validate();
  Rng rng = record_stream(spec, subject, record);
  Rng bg = rng.derive("background");
  Rng placement = rng.derive("seizures");

  Recording rec;
  rec.subject_id = subject_name(subject);
  rec.record_id = record_name(subject, record);
  rec.sample_rate_hz = spec.sample_rate_hz;
  rec.channels = default_montage(spec.channels);
  const auto n = static_cast<std::size_t>(std::llround(spec.record_s * spec.sample_rate_hz));
  for (std::size_t c = 0; c < spec.channels; ++c) {
    Rng ch = bg.derive(c);
    std::vector<double> x = pink_noise(n, ch);
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double rms = n ? std::sqrt(ss / static_cast<double>(n)) : 1.0;
    const double scale = rms > 0.0 ? spec.background_uv / rms : 0.0;
    for (double& v : x) v *= scale;
    rec.samples.push_back(std::move(x));
  }

  const auto intervals = place_seizures(spec, placement);
  if (!with_seizures) return rec;
  rec.seizures = intervals;

  const SeizureSignature sig = subject_signature(spec, subject);
  const double rate = spec.sample_rate_hz;
  const double amp = spec.seizure_gain * spec.background_uv;
  for (const auto& iv : intervals) {
    const auto [s0, s1] = interval_samples(iv, spec.sample_rate_hz);
    const double len_s = static_cast<double>(s1 - s0) / rate;
    const double ramp = std::min(1.0, len_s / 4.0);
    for (std::size_t i = s0; i < s1 && i < n; ++i) {
      const double t = static_cast<double>(i - s0) / rate;
      double env = 1.0;
      if (t < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * t / ramp);
      const double tail = len_s - t;
      if (tail < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * tail / ramp));
      env *= 1.0 + 0.25 * std::sin(kTwoPi * sig.am_hz * t);
      const double ts = static_cast<double>(i) / rate;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        rec.samples[c][i] +=
            amp * sig.channel_gain[c] * env * std::sin(kTwoPi * sig.freq_hz * ts + sig.channel_phase[c]);
      }
    }
  }
  return rec;
}

std::vector<Recording> generate_recordings(const CorpusSpec& spec) {
  spec.validate();
  std::vector<Recording> out;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    for (std::size_t r = 0; r < spec.records_per_subject; ++r) out.push_back(generate_recording(spec, s, r));
  }
  return out;
}

nlohmann::json generate_corpus(const CorpusSpec& spec, const fs::path& dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["spec"] = spec;
  manifest["spec_hash"] = spec.hash();
  manifest["seed"] = spec.seed;
  manifest["records"] = nlohmann::json::array();
  AnnotationTable table;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    const fs::path sdir = dir / subject_name(s);
    fs::create_directories(sdir, ec);
    if (ec) throw ConfigError("cannot create " + sdir.string() + ": " + ec.message());
    const SeizureSignature sig = subject_signature(spec, s);
    for (std::size_t r = 0; r < spec.records_per_subject; ++r) {
      const Recording rec = generate_recording(spec, s, r);
      const fs::path rel = fs::path(rec.subject_id) / (rec.record_id + ".edf");
      write_edf_file((dir / rel).string(), rec);
      table[rec.record_id] = rec.seizures;
      nlohmann::json seizures = nlohmann::json::array();
      for (const auto& iv : rec.seizures) seizures.push_back({iv.start_s, iv.end_s});
      manifest["records"].push_back({{"subject", rec.subject_id},
                                     {"record", rec.record_id},
                                     {"path", rel.generic_string()},
                                     {"seizures", seizures},
                                     {"signature_hz", sig.freq_hz}});
    }
  }
  write_text(dir / "annotations.csv", format_annotations(table));
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

nlohmann::json regenerate_corpus(const fs::path& manifest, const fs::path& dir) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot read " + manifest.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  return generate_corpus(m.at("spec").get<CorpusSpec>(), dir);
}

double band_power(const std::vector<double>& x, double sample_rate_hz, double lo_hz, double hi_hz) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  const double df = sample_rate_hz / static_cast<double>(n);
  const auto k0 = static_cast<std::size_t>(std::ceil(lo_hz / df));
  const auto k1 = std::min(static_cast<std::size_t>(std::floor(hi_hz / df)), n / 2);
  double sum = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = k0; k <= k1; ++k) {
    std::complex<double> acc = 0.0;
    const double w = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, w * static_cast<double>(i));
    sum += std::norm(acc) / static_cast<double>(n);
    ++bins;
  }
  return bins ? sum / static_cast<double>(bins) : 0.0;
}

}  // namespace bendr
