#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"
#include "bendr/preprocess.hpp"

namespace bendr {

NormMode parse_norm_mode(const std::string& name) {
  const std::string key = normalize_label(name);
  if (key == "NONE") return NormMode::None;
  if (key == "MINMAX") return NormMode::MinMax;
  if (key == "MEANSTD") return NormMode::MeanStd;
  throw ConfigError("unknown normalisation mode '" + name + "'");
}

std::string to_string(NormMode mode) {
  switch (mode) {
    case NormMode::None: return "none";
    case NormMode::MinMax: return "minmax";
    case NormMode::MeanStd: return "meanstd";
  }
  return "?";
}

Tensor normalize(const Tensor& window, NormMode mode, double eps) {
  if (mode == NormMode::None) return window;
  Tensor out(window.shape());
  const std::size_t cols = window.cols();
  if (cols == 0) return out;
  for (std::size_t r = 0; r < window.rows(); ++r) {
    auto x = window.row(r);
    auto y = out.row(r);
    if (mode == NormMode::MinMax) {
      const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
      const double denom = *hi - *lo + eps;
      for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - *lo) / denom;
    } else {
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(cols);
      double var = 0.0;
      for (double v : x) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(cols));
      for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) / (sd + eps);
    }
  }
  return out;
}

WindowedDataset preprocess_recording(const Recording& rec, const PreprocessOptions& opt) {
  if (!opt.filter) {
    WindowedDataset ds = segment_windows(rec, opt.window_s);
    for (auto& w : ds.windows) w.data = normalize(w.data, opt.norm);
    return ds;
  }
  FilterSpec spec = opt.filter_spec;
  spec.sample_rate_hz = rec.sample_rate_hz;
  const SosFilter sos = design_butterworth_bandpass(spec);
  Recording filtered = rec;
  filtered.samples = apply_filter(sos, rec.samples);
  WindowedDataset ds = segment_windows(filtered, opt.window_s);
  for (auto& w : ds.windows) w.data = normalize(w.data, opt.norm);
  return ds;
}

}  // namespace bendr
