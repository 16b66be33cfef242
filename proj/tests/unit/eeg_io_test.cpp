#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"
#include "bendr/recording.hpp"
#include "bendr/rng.hpp"
#include "bendr/synthgen.hpp"

namespace bendr {
namespace {

Recording make_recording(std::size_t channels, std::size_t seconds, std::uint64_t seed) {
  Recording r;
  r.subject_id = "s01";
  r.record_id = "s01_r01";
  r.sample_rate_hz = 256;
  Rng rng(seed);
  for (std::size_t c = 0; c < channels; ++c) {
    r.channels.push_back("CH" + std::to_string(c));
    std::vector<double> x(seconds * 256);
    for (double& v : x) v = 50.0 * rng.normal();
    r.samples.push_back(std::move(x));
  }
  return r;
}

// Offset of per-signal field `base` (relative to the signal header block)
// for signal i of ns.
std::size_t signal_field(std::size_t ns, std::size_t block_offset, std::size_t width, std::size_t i) {
  return 256 + ns * block_offset + i * width;
}

TEST(parse_edf, twenty_channels_at_256_hz) {
  const Recording r = make_recording(20, 4, 1);
  const Recording p = parse_edf(write_edf(r));
  EXPECT_EQ(p.sample_rate_hz, 256u);
  EXPECT_EQ(p.channels.size(), 20u);
  EXPECT_EQ(p.sample_count(), 4u * 256u);
  EXPECT_EQ(p.channels, r.channels);
}

TEST(parse_edf, zero_data_records_gives_empty_samples) {
  Recording r = make_recording(3, 0, 2);
  const Recording p = parse_edf(write_edf(r));
  ASSERT_EQ(p.channels.size(), 3u);
  for (const auto& ch : p.samples) EXPECT_TRUE(ch.empty());
  EXPECT_DOUBLE_EQ(p.duration_s(), 0.0);
}

TEST(parse_edf, round_trip_within_one_quantization_step) {
  const Recording r = make_recording(5, 3, 3);
  const Recording p = parse_edf(write_edf(r));
  ASSERT_EQ(p.samples.size(), r.samples.size());
  for (std::size_t c = 0; c < r.samples.size(); ++c) {
    const auto [lo, hi] = std::minmax_element(r.samples[c].begin(), r.samples[c].end());
    // Writer may widen the physical range symmetrically; bound the step by
    // twice the largest magnitude with slack for its rounding.
    const double extent = 1.01 * std::max(std::abs(*lo), std::abs(*hi));
    const double step = 2.0 * extent / 65535.0;
    for (std::size_t i = 0; i < r.samples[c].size(); ++i) {
      ASSERT_NEAR(p.samples[c][i], r.samples[c][i], step) << "channel " << c << " sample " << i;
    }
  }
}

TEST(parse_edf, synthetic_recording_round_trips) {
  CorpusSpec spec;
  spec.subjects = 1;
  spec.records_per_subject = 1;
  spec.record_s = 64;
  const Recording r = generate_recording(spec, 0, 0);
  const Recording p = parse_edf(write_edf(r));
  for (std::size_t c = 0; c < r.samples.size(); ++c) {
    double extent = 0.0;
    for (double v : r.samples[c]) extent = std::max(extent, std::abs(v));
    const double step = 2.0 * 1.01 * extent / 65535.0;
    for (std::size_t i = 0; i < r.samples[c].size(); ++i) {
      ASSERT_NEAR(p.samples[c][i], r.samples[c][i], step);
    }
  }
}

TEST(parse_edf, truncated_header_is_parse_error) {
  const std::string bytes = write_edf(make_recording(2, 1, 4));
  try {
    parse_edf(bytes.substr(0, 100));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 100u);
  }
}

TEST(parse_edf, zero_signals_is_parse_error) {
  std::string bytes = write_edf(make_recording(2, 1, 5));
  bytes.replace(252, 4, "0   ");
  EXPECT_THROW(parse_edf(bytes), ParseError);
}

TEST(parse_edf, mixed_sampling_rates_unsupported) {
  const std::size_t ns = 2;
  std::string bytes = write_edf(make_recording(ns, 1, 6));
  // samples-per-record block starts 216 bytes into the per-signal header.
  bytes.replace(signal_field(ns, 216, 8, 1), 8, "128     ");
  EXPECT_THROW(parse_edf(bytes), UnsupportedError);
}

TEST(select_channels, restricts_to_montage_in_wanted_order) {
  Recording r = make_recording(23, 1, 7);
  std::vector<std::string> wanted;
  for (int c = 19; c >= 0; --c) wanted.push_back("ch" + std::to_string(c) + " ");
  const Recording s = select_channels(r, wanted);
  ASSERT_EQ(s.channels.size(), 20u);
  EXPECT_EQ(s.samples[0], r.samples[19]);
  EXPECT_EQ(s.samples[19], r.samples[0]);
}

TEST(select_channels, all_channels_is_identity) {
  const Recording r = make_recording(4, 1, 8);
  const Recording s = select_channels(r, r.channels);
  EXPECT_EQ(s.channels, r.channels);
  EXPECT_EQ(s.samples, r.samples);
}

TEST(select_channels, absent_label_names_it) {
  const Recording r = make_recording(4, 1, 9);
  try {
    select_channels(r, {"CH0", "FP1-F7"});
    FAIL() << "expected ChannelError";
  } catch (const ChannelError& e) {
    EXPECT_EQ(e.label(), "FP1-F7");
  }
}

TEST(segment_windows, one_hour_gives_450_windows) {
  Recording r;
  r.sample_rate_hz = 256;
  r.channels = {"A"};
  r.samples = {std::vector<double>(3600 * 256, 0.0)};
  const WindowedDataset ds = segment_windows(r, 8.0);
  EXPECT_EQ(ds.size(), 450u);
  EXPECT_EQ(ds.samples_per_window, 2048u);
}

TEST(segment_windows, seizure_labels_match_brute_force_overlap) {
  Recording r;
  r.sample_rate_hz = 256;
  r.channels = {"A"};
  r.samples = {std::vector<double>(300 * 256, 0.0)};
  r.seizures = {{100.0, 130.0}};
  const WindowedDataset ds = segment_windows(r, 8.0);
  for (const Window& w : ds.windows) {
    // Samples [i·2048, (i+1)·2048) against [100·256, 130·256).
    const std::size_t a = w.index * 2048, b = a + 2048;
    const int expected = (a < 130u * 256u && 100u * 256u < b) ? 1 : 0;
    EXPECT_EQ(w.label, expected) << "window " << w.index;
    EXPECT_EQ(w.label, (w.index >= 12 && w.index <= 16) ? 1 : 0);
  }
}

TEST(segment_windows, windows_concatenate_to_signal_prefix) {
  const Recording r = make_recording(2, 20, 10);
  const WindowedDataset ds = segment_windows(r, 8.0);
  ASSERT_EQ(ds.size(), 2u);
  for (std::size_t c = 0; c < 2; ++c) {
    for (const Window& w : ds.windows) {
      for (std::size_t t = 0; t < 2048; ++t) {
        ASSERT_EQ(w.data.at(c, t), r.samples[c][w.index * 2048 + t]);
      }
    }
  }
}

TEST(segment_windows, record_shorter_than_window_is_empty) {
  const Recording r = make_recording(1, 7, 11);
  EXPECT_EQ(segment_windows(r, 8.0).size(), 0u);
}

TEST(load_annotations, single_line) {
  const AnnotationTable t = load_annotations("rec1,100,130\n");
  ASSERT_EQ(t.at("rec1").size(), 1u);
  EXPECT_EQ(t.at("rec1")[0], (SeizureInterval{100.0, 130.0}));
}

TEST(load_annotations, overlapping_intervals_merge) {
  const AnnotationTable t = load_annotations("# header\nrec1,15,30\nrec1,10,20\n");
  ASSERT_EQ(t.at("rec1").size(), 1u);
  EXPECT_EQ(t.at("rec1")[0], (SeizureInterval{10.0, 30.0}));
}

TEST(load_annotations, empty_interval_reports_line) {
  try {
    load_annotations("rec0,1,2\nrec1,30,30\n");
    FAIL() << "expected AnnotationError";
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(load_annotations, non_numeric_field) {
  EXPECT_THROW(load_annotations("rec1,abc,30\n"), AnnotationError);
}

TEST(load_annotations, format_round_trip) {
  const AnnotationTable t = load_annotations("b,5,6\na,1,2\na,3,4\n");
  EXPECT_EQ(load_annotations(format_annotations(t)), t);
}

}  // namespace
}  // namespace bendr
