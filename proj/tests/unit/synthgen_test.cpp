#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bendr/dataset.hpp"
#include "bendr/errors.hpp"
#include "bendr/synthgen.hpp"

namespace bendr {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bendr_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<double> slice(const std::vector<double>& x, std::size_t a, std::size_t b) {
  return std::vector<double>(x.begin() + a, x.begin() + b);
}

TEST(generate_recording, no_seizures_no_annotations) {
  CorpusSpec spec;
  spec.seizures_per_record = 0;
  const Recording r = generate_recording(spec, 0, 0);
  EXPECT_TRUE(r.seizures.empty());
  EXPECT_EQ(r.channels.size(), 20u);
  EXPECT_EQ(r.sample_count(), 256u * 256u);
}

TEST(generate_recording, band_power_oracle) {
  const CorpusSpec spec;
  const SeizureSignature sig = subject_signature(spec, 1);
  const Recording with = generate_recording(spec, 1, 2, true);
  const Recording without = generate_recording(spec, 1, 2, false);
  ASSERT_EQ(with.seizures.size(), 1u);
  const SeizureInterval iv = with.seizures[0];
  const auto [a, b] = interval_samples(iv, 256);
  const double lo = sig.freq_hz - 1.0, hi = sig.freq_hz + 1.0;
  // Two-second margin keeps the raised-cosine ramps out of the outside segment.
  const std::size_t margin = 512;
  for (std::size_t c = 0; c < with.samples.size(); ++c) {
    const double inside = band_power(slice(with.samples[c], a, b), 256, lo, hi) /
                          band_power(slice(without.samples[c], a, b), 256, lo, hi);
    EXPECT_GT(inside, 2.0) << "channel " << c;
    const std::size_t oa = b + margin < with.sample_count() ? b + margin : 0;
    const std::size_t ob = oa == 0 ? a - margin : std::min(with.sample_count(), oa + (b - a));
    const double outside = band_power(slice(with.samples[c], oa, ob), 256, lo, hi) /
                           band_power(slice(without.samples[c], oa, ob), 256, lo, hi);
    EXPECT_LT(outside, 1.2) << "channel " << c;
  }
}

TEST(generate_recording, same_seed_bit_identical) {
  const CorpusSpec spec;
  const Recording a = generate_recording(spec, 2, 3);
  const Recording b = generate_recording(spec, 2, 3);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.seizures, b.seizures);
  CorpusSpec other = spec;
  other.seed = 2;
  EXPECT_NE(generate_recording(other, 2, 3).samples, a.samples);
}

TEST(generate_recording, infeasible_packing) {
  CorpusSpec spec;
  spec.record_s = 64;
  spec.seizures_per_record = 3;
  EXPECT_THROW(generate_recording(spec, 0, 0), SpecError);
}

TEST(generate_recording, subjects_have_distinct_signatures) {
  const CorpusSpec spec;
  std::vector<double> f;
  for (std::size_t s = 0; s < 3; ++s) f.push_back(subject_signature(spec, s).freq_hz);
  std::sort(f.begin(), f.end());
  EXPECT_LT(f.front(), f.back());
  for (double v : f) {
    EXPECT_GE(v, spec.freq_min_hz);
    EXPECT_LE(v, spec.freq_max_hz);
  }
}

TEST(generate_recording, seizures_fit_without_overlap) {
  CorpusSpec spec;
  spec.seizures_per_record = 3;
  spec.record_s = 600;
  for (std::size_t r = 0; r < 10; ++r) {
    const Recording rec = generate_recording(spec, 0, r);
    ASSERT_EQ(rec.seizures.size(), 3u);
    EXPECT_NO_THROW(rec.validate());
    for (const auto& iv : rec.seizures) {
      EXPECT_GE(iv.start_s, spec.min_gap_s);
      EXPECT_LE(iv.end_s, spec.record_s - spec.min_gap_s);
      EXPECT_GE(iv.end_s - iv.start_s, spec.seizure_min_s);
      EXPECT_LE(iv.end_s - iv.start_s, spec.seizure_max_s);
    }
  }
}

TEST(generate_recording, windows_separable_by_band_power) {
  const CorpusSpec spec;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    const SeizureSignature sig = subject_signature(spec, s);
    double max_neg = 0.0, min_pos = 1e300;
    for (std::size_t r = 0; r < spec.records_per_subject; ++r) {
      const WindowedDataset ds = segment_windows(generate_recording(spec, s, r), 8.0);
      for (const Window& w : ds.windows) {
        double p = 0.0;
        for (std::size_t c = 0; c < w.data.rows(); ++c) {
          const auto row = w.data.row(c);
          p += band_power(std::vector<double>(row.begin(), row.end()), 256, sig.freq_hz - 1.0,
                          sig.freq_hz + 1.0);
        }
        if (w.label) {
          min_pos = std::min(min_pos, p);
        } else {
          max_neg = std::max(max_neg, p);
        }
      }
    }
    EXPECT_LT(max_neg, min_pos) << "subject " << s;
  }
}

TEST(generate_corpus, three_by_four_layout) {
  const fs::path dir = scratch_dir("layout");
  CorpusSpec spec;
  spec.record_s = 32;
  spec.seizure_min_s = 8;
  spec.seizure_max_s = 8;
  const nlohmann::json manifest = generate_corpus(spec, dir);
  std::size_t edf = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) edf += e.path().extension() == ".edf";
  EXPECT_EQ(edf, 12u);
  EXPECT_EQ(manifest.at("records").size(), 12u);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "annotations.csv"));
  EXPECT_TRUE(fs::exists(dir / "sub01" / "sub01_r01.edf"));
  fs::remove_all(dir);
}

TEST(generate_corpus, parses_back_with_matching_labels) {
  const fs::path dir = scratch_dir("parse");
  CorpusSpec spec;
  spec.subjects = 2;
  spec.records_per_subject = 2;
  spec.record_s = 64;
  spec.seizure_min_s = 16;
  spec.seizure_max_s = 24;
  generate_corpus(spec, dir);
  const auto parsed = read_corpus_recordings(dir, {});
  const auto truth = generate_recordings(spec);
  ASSERT_EQ(parsed.size(), truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    EXPECT_EQ(parsed[i].record_id, truth[i].record_id);
    EXPECT_EQ(parsed[i].seizures, truth[i].seizures);
    std::vector<int> a, b;
    for (const Window& w : segment_windows(parsed[i], 8.0).windows) a.push_back(w.label);
    for (const Window& w : segment_windows(truth[i], 8.0).windows) b.push_back(w.label);
    EXPECT_EQ(a, b);
  }
  fs::remove_all(dir);
}

TEST(generate_corpus, hash_tracks_spec) {
  CorpusSpec a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.seizure_gain = 5.0;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.seed = 9;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(generate_corpus, regenerate_from_manifest) {
  const fs::path dir = scratch_dir("orig");
  const fs::path again = scratch_dir("again");
  CorpusSpec spec;
  spec.subjects = 2;
  spec.records_per_subject = 1;
  spec.record_s = 32;
  spec.seizure_min_s = 8;
  spec.seizure_max_s = 8;
  generate_corpus(spec, dir);
  regenerate_corpus(dir / "manifest.json", again);
  for (const char* rel : {"manifest.json", "annotations.csv", "sub01/sub01_r01.edf",
                          "sub02/sub02_r01.edf"}) {
    EXPECT_EQ(slurp(dir / rel), slurp(again / rel)) << rel;
  }
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(corpus_spec, validation) {
  CorpusSpec s;
  s.record_s = 10.5;
  EXPECT_THROW(s.validate(), SpecError);
  s = CorpusSpec{};
  s.freq_max_hz = 200;
  EXPECT_THROW(s.validate(), SpecError);
  s = CorpusSpec{};
  nlohmann::json j = s;
  EXPECT_EQ(j.get<CorpusSpec>().hash(), s.hash());
}

}  // namespace
}  // namespace bendr
