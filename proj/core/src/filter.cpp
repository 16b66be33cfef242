#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bendr/errors.hpp"
#include "bendr/preprocess.hpp"

namespace bendr {

using cplx = std::complex<double>;

SosFilter design_butterworth_bandpass(const FilterSpec& spec) {
  const double fs = spec.sample_rate_hz;
  const double nyquist = fs / 2.0;
  if (spec.order < 1) throw DesignError("filter order must be at least 1");
  if (!(fs > 0.0)) throw DesignError("sample rate must be positive");
  if (!(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz && spec.high_hz < nyquist)) {
    throw DesignError("band edges must satisfy 0 < low < high < Nyquist (" +
                      std::to_string(nyquist) + " Hz)");
  }
  const int n = spec.order;
  const double pi = std::numbers::pi;

  // Pre-warped analog edges.
  const double w1 = 2.0 * fs * std::tan(pi * spec.low_hz / fs);
  const double w2 = 2.0 * fs * std::tan(pi * spec.high_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<cplx> analog;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + n + 1.0) / (2.0 * n));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    analog.push_back(half + root);
    analog.push_back(half - root);
  }

  const double k2 = 2.0 * fs;
  std::vector<cplx> upper;
  std::vector<double> real;
  for (const cplx& s : analog) {
    const cplx z = (k2 + s) / (k2 - s);
    const double tol = 1e-10 * std::max(1.0, std::abs(z));
    if (std::abs(z.imag()) <= tol) {
      real.push_back(z.real());
    } else if (z.imag() > 0.0) {
      upper.push_back(z);
    }
  }
  if (real.size() % 2 != 0 || upper.size() * 2 + real.size() != analog.size()) {
    throw DesignError("pole set is not conjugate-symmetric");
  }
  std::sort(real.begin(), real.end());

  SosFilter sos;
  for (const cplx& z : upper) {
    SecondOrderSection sec;
    sec.b0 = 1.0;
    sec.b1 = 0.0;
    sec.b2 = -1.0;
    sec.a1 = -2.0 * z.real();
    sec.a2 = std::norm(z);
    sos.push_back(sec);
  }
  for (std::size_t i = 0; i < real.size(); i += 2) {
    SecondOrderSection sec;
    sec.b0 = 1.0;
    sec.b1 = 0.0;
    sec.b2 = -1.0;
    sec.a1 = -(real[i] + real[i + 1]);
    sec.a2 = real[i] * real[i + 1];
    sos.push_back(sec);
  }

  // Unit gain at the (digital image of the) geometric centre frequency.
  const double center_hz = fs / pi * std::atan(w0 / k2);
  const double g = std::abs(frequency_response(sos, center_hz, fs));
  const double per_section = std::pow(1.0 / g, 1.0 / static_cast<double>(sos.size()));
  for (auto& sec : sos) {
    sec.b0 *= per_section;
    sec.b1 *= per_section;
    sec.b2 *= per_section;
  }
  return sos;
}

std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double sample_rate_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  const cplx z1 = std::polar(1.0, -w);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sos) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

double gain_db(const SosFilter& sos, double freq_hz, double sample_rate_hz) {
  return 20.0 * std::log10(std::abs(frequency_response(sos, freq_hz, sample_rate_hz)));
}

std::vector<std::complex<double>> filter_poles(const SosFilter& sos) {
  std::vector<cplx> poles;
  for (const auto& s : sos) {
    // z² + a1 z + a2 = 0
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    poles.push_back((-s.a1 + disc) / 2.0);
    poles.push_back((-s.a1 - disc) / 2.0);
  }
  return poles;
}

std::vector<double> apply_filter(const SosFilter& sos, const std::vector<double>& signal) {
  if (!all_finite(signal)) throw SignalError("filter input contains NaN or Inf");
  std::vector<double> y = signal;
  for (const auto& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<std::vector<double>> apply_filter(const SosFilter& sos,
                                              const std::vector<std::vector<double>>& channels) {
  std::vector<std::vector<double>> out;
  out.reserve(channels.size());
  for (const auto& ch : channels) out.push_back(apply_filter(sos, ch));
  return out;
}

std::string sos_to_csv(const SosFilter& sos) {
  std::ostringstream out;
  out.precision(17);
  out << "b0,b1,b2,a0,a1,a2\n";
  for (const auto& s : sos) {
    out << s.b0 << ',' << s.b1 << ',' << s.b2 << ",1," << s.a1 << ',' << s.a2 << '\n';
  }
  return out.str();
}

}  // namespace bendr
