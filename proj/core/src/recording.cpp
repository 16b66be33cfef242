#include <algorithm>
#include <cctype>
#include <cmath>

#include "bendr/errors.hpp"
#include "bendr/recording.hpp"

namespace bendr {

void Recording::validate() const {
  if (sample_rate_hz == 0) throw SignalError("sample rate must be positive");
  if (channels.size() != samples.size()) {
    throw SignalError("recording has " + std::to_string(channels.size()) + " labels but " +
                      std::to_string(samples.size()) + " sample sequences");
  }
  for (const auto& s : samples) {
    if (s.size() != sample_count()) throw SignalError("channels have unequal lengths");
  }
  const double duration = duration_s();
  for (std::size_t i = 0; i < seizures.size(); ++i) {
    const auto& iv = seizures[i];
    if (!(iv.start_s >= 0.0 && iv.start_s < iv.end_s && iv.end_s <= duration)) {
      throw AnnotationError("seizure interval [" + std::to_string(iv.start_s) + ", " +
                                std::to_string(iv.end_s) + ") outside record of " +
                                std::to_string(duration) + " s",
                            i + 1);
    }
    if (i > 0 && iv.start_s < seizures[i - 1].end_s) {
      throw AnnotationError("seizure intervals overlap or are unsorted", i + 1);
    }
  }
}

std::size_t WindowedDataset::positives() const {
  return static_cast<std::size_t>(std::count_if(windows.begin(), windows.end(),
                                                [](const Window& w) { return w.label == 1; }));
}

void WindowedDataset::append(const WindowedDataset& other) {
  if (windows.empty()) {
    window_s = other.window_s;
    channel_count = other.channel_count;
    samples_per_window = other.samples_per_window;
  } else if (!other.windows.empty() && (other.channel_count != channel_count ||
                                        other.samples_per_window != samples_per_window)) {
    throw ShapeError("cannot append datasets with different window geometry");
  }
  windows.insert(windows.end(), other.windows.begin(), other.windows.end());
}

std::string normalize_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

Recording select_channels(const Recording& rec, const std::vector<std::string>& wanted) {
  Recording out = rec;
  out.channels.clear();
  out.samples.clear();
  for (const auto& w : wanted) {
    const std::string key = normalize_label(w);
    auto it = std::find_if(rec.channels.begin(), rec.channels.end(),
                           [&](const std::string& c) { return normalize_label(c) == key; });
    if (it == rec.channels.end()) throw ChannelError(w);
    const auto idx = static_cast<std::size_t>(it - rec.channels.begin());
    out.channels.push_back(rec.channels[idx]);
    out.samples.push_back(rec.samples[idx]);
  }
  return out;
}

std::pair<std::size_t, std::size_t> interval_samples(const SeizureInterval& iv,
                                                     std::uint32_t sample_rate_hz) {
  const double rate = static_cast<double>(sample_rate_hz);
  // Sample i sits at time i/rate; it belongs to [start, end) iff start <= i/rate < end.
  const auto first = static_cast<std::size_t>(std::ceil(iv.start_s * rate - 1e-9));
  const auto last = static_cast<std::size_t>(std::ceil(iv.end_s * rate - 1e-9));
  return {first, last};
}

WindowedDataset segment_windows(const Recording& rec, double window_s, double overlap_s) {
  if (!(window_s > 0.0)) throw ConfigError("window length must be positive");
  if (overlap_s < 0.0 || overlap_s >= window_s) {
    throw ConfigError("window overlap must lie in [0, window length)");
  }
  const double rate = static_cast<double>(rec.sample_rate_hz);
  const auto t = static_cast<std::size_t>(std::llround(window_s * rate));
  const auto step = static_cast<std::size_t>(std::llround((window_s - overlap_s) * rate));
  if (t == 0 || step == 0) throw ConfigError("window shorter than one sample");

  WindowedDataset ds;
  ds.window_s = window_s;
  ds.channel_count = rec.channels.size();
  ds.samples_per_window = t;

  const std::size_t n = rec.sample_count();
  if (n < t) return ds;
  const std::size_t count = (n - t) / step + 1;

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& iv : rec.seizures) ranges.push_back(interval_samples(iv, rec.sample_rate_hz));

  ds.windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t a = i * step;
    Window w;
    w.subject_id = rec.subject_id;
    w.record_id = rec.record_id;
    w.index = i;
    w.data = Tensor({ds.channel_count, t});
    for (std::size_t c = 0; c < ds.channel_count; ++c) {
      std::copy_n(rec.samples[c].begin() + static_cast<std::ptrdiff_t>(a), t,
                  w.data.data() + c * t);
    }
    for (const auto& [s0, s1] : ranges) {
      if (std::max(a, s0) < std::min(a + t, s1)) {
        w.label = 1;
        break;
      }
    }
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace bendr
