#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pmseg {

enum class ClassifierType { Specific, Generic };
std::string_view to_string(ClassifierType t);
ClassifierType parse_classifier_type(std::string_view s);

/// One class of one evaluated classifier.
struct ReportRow {
  ClassifierType type = ClassifierType::Generic;
  /// Source a specific classifier was trained on; empty for generic ones.
  std::string source;
  std::string loss;
  double shrink_percent = 80.0;
  std::string class_name;
  double dice = 0.0;
  /// Test images that contributed to this class.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  /// Highest dice for this class among the classifiers of the same shrink
  /// level and seed.
  bool best = false;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Header plus one line per row. Doubles use 17 significant digits so
/// parse_report(report_to_csv(rows)) == rows.
std::string report_to_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_report(std::string_view csv);

/// Sets `best` on every row that ties the maximum dice within its
/// (shrink, seed, class) group.
void mark_best(std::vector<ReportRow>& rows);

}  // namespace pmseg
