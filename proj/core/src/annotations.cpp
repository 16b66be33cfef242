#include <algorithm>
#include <charconv>
#include <sstream>

#include "bendr/errors.hpp"
#include "bendr/recording.hpp"

namespace bendr {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_seconds(std::string_view field, std::size_t line) {
  field = strip(field);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw AnnotationError("'" + std::string(field) + "' is not a number", line);
  }
  return v;
}

}  // namespace

std::vector<SeizureInterval> merge_intervals(std::vector<SeizureInterval> intervals) {
  std::sort(intervals.begin(), intervals.end(), [](const auto& a, const auto& b) {
    return a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s);
  });
  std::vector<SeizureInterval> out;
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.start_s <= out.back().end_s) {
      out.back().end_s = std::max(out.back().end_s, iv.end_s);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

AnnotationTable load_annotations(std::string_view text) {
  AnnotationTable table;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 3) {
      throw AnnotationError("expected record_id,start_s,end_s", line_no);
    }
    const std::string record(strip(fields[0]));
    if (record.empty()) throw AnnotationError("empty record id", line_no);
    const double start = parse_seconds(fields[1], line_no);
    const double end = parse_seconds(fields[2], line_no);
    if (!(start >= 0.0 && start < end)) {
      throw AnnotationError("interval must satisfy 0 <= start < end", line_no);
    }
    table[record].push_back({start, end});
  }
  for (auto& [record, intervals] : table) intervals = merge_intervals(std::move(intervals));
  return table;
}

std::string format_annotations(const AnnotationTable& table) {
  std::ostringstream out;
  out << "# record_id,start_s,end_s\n";
  auto shortest = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (const auto& [record, intervals] : table) {
    for (const auto& iv : intervals) {
      out << record << ',' << shortest(iv.start_s) << ',' << shortest(iv.end_s) << '\n';
    }
  }
  return out.str();
}

}  // namespace bendr
