#pragma once

#include <complex>
#include <string>
#include <vector>

#include "bendr/recording.hpp"
#include "bendr/tensor.hpp"

namespace bendr {

struct FilterSpec {
  int order = 5;
  double low_hz = 0.5;
  double high_hz = 50.0;
  double sample_rate_hz = 256.0;
};

// One biquad: H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²).
struct SecondOrderSection {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using SosFilter = std::vector<SecondOrderSection>;

// Digital Butterworth band-pass: analog prototype, low-pass to band-pass
// transform around pre-warped edges, bilinear transform. Produces `order`
// sections whose −3 dB points land on the requested edges.
SosFilter design_butterworth_bandpass(const FilterSpec& spec);

std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double sample_rate_hz);
double gain_db(const SosFilter& sos, double freq_hz, double sample_rate_hz);

// Roots of every section's denominator.
std::vector<std::complex<double>> filter_poles(const SosFilter& sos);

// Causal cascade, transposed direct form II, zero initial state.
std::vector<double> apply_filter(const SosFilter& sos, const std::vector<double>& signal);
std::vector<std::vector<double>> apply_filter(const SosFilter& sos,
                                              const std::vector<std::vector<double>>& channels);

// CSV with one row per section: b0,b1,b2,a0,a1,a2.
std::string sos_to_csv(const SosFilter& sos);

enum class NormMode { None, MinMax, MeanStd };

inline constexpr double kNormalizeEps = 1e-8;

NormMode parse_norm_mode(const std::string& name);
std::string to_string(NormMode mode);

// Per-channel (row) normalisation of a C×T window.
//   MinMax:  (x − min) / (max − min + ε)
//   MeanStd: (x − μ) / (σ + ε), σ the population standard deviation
Tensor normalize(const Tensor& window, NormMode mode, double eps = kNormalizeEps);

struct PreprocessOptions {
  bool filter = true;
  FilterSpec filter_spec{};
  NormMode norm = NormMode::MeanStd;
  double window_s = 8.0;
};

// Record-level filtering, segmentation, then per-window normalisation.
WindowedDataset preprocess_recording(const Recording& rec, const PreprocessOptions& opt);

}  // namespace bendr
