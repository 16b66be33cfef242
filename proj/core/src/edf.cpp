#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bendr/errors.hpp"
#include "bendr/recording.hpp"

namespace bendr {

namespace {

constexpr std::size_t kFixedHeader = 256;
constexpr std::size_t kSignalHeader = 256;
constexpr int kDigitalMin = -32768;
constexpr int kDigitalMax = 32767;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::string field(std::size_t offset, std::size_t width) const {
    if (offset + width > bytes_.size()) throw ParseError("EDF header truncated", bytes_.size());
    return trim(bytes_.substr(offset, width));
  }

  double number(std::size_t offset, std::size_t width, const char* what) const {
    const std::string s = field(offset, width);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ParseError(std::string("EDF field '") + what + "' is not numeric: '" + s + "'", offset);
    }
    return v;
  }

  long integer(std::size_t offset, std::size_t width, const char* what) const {
    const double v = number(offset, width, what);
    if (v != std::floor(v)) {
      throw ParseError(std::string("EDF field '") + what + "' is not an integer", offset);
    }
    return static_cast<long>(v);
  }

 private:
  std::string_view bytes_;
};

// Left-justified, space-padded ASCII field; throws if the text does not fit.
void put_field(std::string& out, std::string_view text, std::size_t width) {
  if (text.size() > width) {
    throw UnsupportedError("EDF field value '" + std::string(text) + "' exceeds " +
                           std::to_string(width) + " characters");
  }
  out.append(text);
  out.append(width - text.size(), ' ');
}

std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.size() <= 8) return s;
  for (int prec = 7; prec >= 1; --prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::string(buf).size() <= 8) return buf;
  }
  throw UnsupportedError("cannot encode " + s + " in an 8-character EDF field");
}

// Symmetric physical range rounded up to three significant digits so that
// the text written to the header is exactly the range used for quantising.
double physical_extent(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  if (m == 0.0) return 1.0;
  const double unit = std::pow(10.0, std::floor(std::log10(m)) - 2.0);
  double extent = std::ceil(m / unit) * unit;
  // Re-read the formatted text; nudge upward if decimal rounding shrank it.
  for (int i = 0; i < 4; ++i) {
    const double parsed = std::stod(format_number(extent));
    if (parsed >= m) return parsed;
    extent += unit;
  }
  return std::stod(format_number(extent));
}

}  // namespace

Recording parse_edf(std::string_view bytes) {
  if (bytes.size() < kFixedHeader) throw ParseError("EDF header truncated", bytes.size());
  HeaderReader h(bytes);
  const std::string version = h.field(0, 8);
  if (version != "0") throw ParseError("unsupported EDF version '" + version + "'", 0);

  Recording rec;
  rec.subject_id = h.field(8, 80);
  rec.record_id = h.field(88, 80);
  const long header_bytes = h.integer(184, 8, "header bytes");
  const std::string reserved = h.field(192, 44);
  if (reserved.rfind("EDF+", 0) == 0 && reserved != "EDF+C") {
    throw UnsupportedError("discontinuous EDF+ recordings are not supported");
  }
  long n_records = h.integer(236, 8, "number of data records");
  const double record_duration = h.number(244, 8, "data record duration");
  const long ns = h.integer(252, 4, "number of signals");
  if (ns <= 0) throw ParseError("EDF file declares no signals", 252);
  const auto n_signals = static_cast<std::size_t>(ns);
  const std::size_t expected_header = kFixedHeader + kSignalHeader * n_signals;
  if (header_bytes != static_cast<long>(expected_header)) {
    throw ParseError("EDF header size " + std::to_string(header_bytes) + " does not match " +
                         std::to_string(n_signals) + " signals",
                     184);
  }
  if (bytes.size() < expected_header) throw ParseError("EDF signal headers truncated", bytes.size());
  if (!(record_duration > 0.0)) throw ParseError("EDF data record duration must be positive", 244);

  // Signal header fields are stored field-major: all labels, then all transducers, ...
  auto field_offset = [n_signals](std::size_t preceding_width_sum, std::size_t width,
                                  std::size_t i) {
    return kFixedHeader + preceding_width_sum * n_signals + width * i;
  };
  std::vector<double> pmin(n_signals), pmax(n_signals);
  std::vector<long> dmin(n_signals), dmax(n_signals), spr(n_signals);
  for (std::size_t i = 0; i < n_signals; ++i) {
    rec.channels.push_back(h.field(field_offset(0, 16, i), 16));
    pmin[i] = h.number(field_offset(104, 8, i), 8, "physical minimum");
    pmax[i] = h.number(field_offset(112, 8, i), 8, "physical maximum");
    dmin[i] = h.integer(field_offset(120, 8, i), 8, "digital minimum");
    dmax[i] = h.integer(field_offset(128, 8, i), 8, "digital maximum");
    spr[i] = h.integer(field_offset(216, 8, i), 8, "samples per record");
    if (normalize_label(rec.channels.back()) == "EDFANNOTATIONS") {
      throw UnsupportedError("in-band EDF+ annotation signals are not supported");
    }
    if (dmax[i] <= dmin[i]) {
      throw ParseError("digital maximum must exceed digital minimum", field_offset(120, 8, i));
    }
    if (pmax[i] == pmin[i]) {
      throw ParseError("physical range is empty", field_offset(104, 8, i));
    }
    if (spr[i] <= 0) throw ParseError("samples per record must be positive", field_offset(216, 8, i));
    if (spr[i] != spr[0]) throw UnsupportedError("signals use different sampling rates");
  }

  const double rate = static_cast<double>(spr[0]) / record_duration;
  if (std::abs(rate - std::round(rate)) > 1e-9) {
    throw UnsupportedError("non-integer sampling rate " + std::to_string(rate));
  }
  rec.sample_rate_hz = static_cast<std::uint32_t>(std::llround(rate));

  const std::size_t record_bytes = 2 * static_cast<std::size_t>(spr[0]) * n_signals;
  const std::size_t available = bytes.size() - expected_header;
  if (n_records < 0) {
    n_records = static_cast<long>(available / record_bytes);
  } else if (static_cast<std::size_t>(n_records) * record_bytes > available) {
    throw ParseError("EDF data section truncated: expected " + std::to_string(n_records) +
                         " records",
                     bytes.size());
  }

  const auto per_record = static_cast<std::size_t>(spr[0]);
  rec.samples.assign(n_signals, std::vector<double>(per_record * static_cast<std::size_t>(n_records)));
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + expected_header);
  for (std::size_t r = 0; r < static_cast<std::size_t>(n_records); ++r) {
    for (std::size_t s = 0; s < n_signals; ++s) {
      const double gain = (pmax[s] - pmin[s]) / static_cast<double>(dmax[s] - dmin[s]);
      const unsigned char* p = data + r * record_bytes + s * per_record * 2;
      double* dst = rec.samples[s].data() + r * per_record;
      for (std::size_t k = 0; k < per_record; ++k) {
        const auto digital = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(p[2 * k]) | (static_cast<std::uint16_t>(p[2 * k + 1]) << 8));
        dst[k] = pmin[s] + (static_cast<double>(digital) - static_cast<double>(dmin[s])) * gain;
      }
    }
  }
  return rec;
}

std::string write_edf(const Recording& rec) {
  rec.validate();
  const std::size_t ns = rec.channels.size();
  if (ns == 0) throw UnsupportedError("cannot write an EDF file without signals");
  const std::size_t n = rec.sample_count();
  if (n % rec.sample_rate_hz != 0) {
    throw UnsupportedError("EDF writer needs a whole number of one-second data records");
  }
  const std::size_t n_records = n / rec.sample_rate_hz;
  const std::size_t header_bytes = kFixedHeader + kSignalHeader * ns;

  std::string out;
  out.reserve(header_bytes + 2 * n * ns);
  put_field(out, "0", 8);
  put_field(out, rec.subject_id, 80);
  put_field(out, rec.record_id, 80);
  put_field(out, "01.01.00", 8);
  put_field(out, "00.00.00", 8);
  put_field(out, std::to_string(header_bytes), 8);
  put_field(out, "", 44);
  put_field(out, std::to_string(n_records), 8);
  put_field(out, "1", 8);
  put_field(out, std::to_string(ns), 4);

  // The quantiser uses exactly the values a reader will parse back.
  std::vector<std::string> lo_text(ns), hi_text(ns);
  std::vector<double> lo(ns), hi(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const double extent = physical_extent(rec.samples[s]);
    lo_text[s] = format_number(-extent);
    hi_text[s] = format_number(extent);
    lo[s] = std::stod(lo_text[s]);
    hi[s] = std::stod(hi_text[s]);
  }

  for (const auto& label : rec.channels) put_field(out, label, 16);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, "", 80);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, "uV", 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, lo_text[s], 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, hi_text[s], 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, std::to_string(kDigitalMin), 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, std::to_string(kDigitalMax), 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, "", 80);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, std::to_string(rec.sample_rate_hz), 8);
  for (std::size_t s = 0; s < ns; ++s) put_field(out, "", 32);

  const std::size_t per_record = rec.sample_rate_hz;
  constexpr double span = static_cast<double>(kDigitalMax) - kDigitalMin;
  for (std::size_t r = 0; r < n_records; ++r) {
    for (std::size_t s = 0; s < ns; ++s) {
      const double scale = span / (hi[s] - lo[s]);
      for (std::size_t k = 0; k < per_record; ++k) {
        const double x = rec.samples[s][r * per_record + k];
        double d = std::round((x - lo[s]) * scale + kDigitalMin);
        d = std::clamp(d, static_cast<double>(kDigitalMin), static_cast<double>(kDigitalMax));
        const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(d));
        out.push_back(static_cast<char>(u & 0xff));
        out.push_back(static_cast<char>(u >> 8));
      }
    }
  }
  return out;
}

Recording read_edf_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open EDF file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_edf(ss.str());
}

void write_edf_file(const std::string& path, const Recording& rec) {
  const std::string bytes = write_edf(rec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write EDF file: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

}  // namespace bendr
