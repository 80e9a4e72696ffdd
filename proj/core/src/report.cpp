#include "pmseg/report.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <tuple>

#include "pmseg/error.hpp"

namespace pmseg {
namespace {

constexpr std::string_view kHeader = "type,source,loss,shrink_percent,class,dice,samples,seed,best";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Names must not need quoting.
void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError(std::string("report: ") + what + " '" + s + "' contains a reserved character");
}

template <typename T>
T parse_number(std::string_view s, std::size_t line, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("report line " + std::to_string(line) + ": bad " + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view to_string(ClassifierType t) { return t == ClassifierType::Specific ? "specific" : "generic"; }

ClassifierType parse_classifier_type(std::string_view s) {
  if (s == "specific") return ClassifierType::Specific;
  if (s == "generic") return ClassifierType::Generic;
  throw ConfigError("classifier type must be 'specific' or 'generic', got '" + std::string(s) + "'");
}

std::string report_to_csv(const std::vector<ReportRow>& rows) {
  std::string out(kHeader);
  out += "\n";
  for (const ReportRow& r : rows) {
    check_field(r.source, "source");
    check_field(r.loss, "loss");
    check_field(r.class_name, "class");
    out += std::string(to_string(r.type)) + "," + r.source + "," + r.loss + "," + fmt(r.shrink_percent) + "," +
           r.class_name + "," + fmt(r.dice) + "," + std::to_string(r.samples) + "," + std::to_string(r.seed) + "," +
           (r.best ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report(std::string_view csv) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  while (!csv.empty()) {
    const std::size_t nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kHeader) throw ConfigError("report: unexpected header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 9)
      throw ConfigError("report line " + std::to_string(line_no) + ": expected 9 fields, got " +
                        std::to_string(f.size()));
    ReportRow r;
    r.type = parse_classifier_type(f[0]);
    r.source = f[1];
    r.loss = f[2];
    r.shrink_percent = parse_number<double>(f[3], line_no, "shrink_percent");
    r.class_name = f[4];
    r.dice = parse_number<double>(f[5], line_no, "dice");
    if (!(r.dice >= 0.0 && r.dice <= 1.0))
      throw ConfigError("report line " + std::to_string(line_no) + ": dice outside [0, 1]");
    r.samples = parse_number<std::size_t>(f[6], line_no, "samples");
    r.seed = parse_number<std::uint64_t>(f[7], line_no, "seed");
    if (f[8] != "0" && f[8] != "1") throw ConfigError("report line " + std::to_string(line_no) + ": bad best flag");
    r.best = f[8] == "1";
    rows.push_back(std::move(r));
  }
  if (line_no == 0) throw ConfigError("report: empty input");
  return rows;
}

void mark_best(std::vector<ReportRow>& rows) {
  std::map<std::tuple<double, std::uint64_t, std::string>, double> best;
  for (const ReportRow& r : rows) {
    auto key = std::make_tuple(r.shrink_percent, r.seed, r.class_name);
    auto it = best.find(key);
    if (it == best.end() || r.dice > it->second) best[key] = r.dice;
  }
  for (ReportRow& r : rows) r.best = r.dice == best[std::make_tuple(r.shrink_percent, r.seed, r.class_name)];
}

}  // namespace pmseg
