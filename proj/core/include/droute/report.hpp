#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "droute/evaluate.hpp"

namespace droute {

enum class ReportFormat { csv, markdown };

ReportFormat parse_report_format(std::string_view text);

inline constexpr const char* kReportColumns[] = {"group",    "count",    "mean_obj",        "mean_gap",
                                                 "obj_star", "gap_star", "worst_group_gap", "time_s"};

// One report line. Gaps are percentages. Empty cells are nullopt: obj_star
// and gap_star are set on atypical groups and the summary row only,
// worst_group_gap on the summary row only.
struct ReportRow {
  std::string group;
  std::size_t count = 0;
  std::optional<double> mean_obj;
  std::optional<double> mean_gap;
  std::optional<double> obj_star;
  std::optional<double> gap_star;
  std::optional<double> worst_group_gap;
  std::optional<double> time_s;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

inline constexpr std::string_view kSummaryRow = "overall";

// Group rows in order, then the summary row. Values are rounded to the six
// significant digits that the emitted text carries.
std::vector<ReportRow> report_rows(const Metrics& metrics);

std::string emit_report(const Metrics& metrics, ReportFormat format);
std::string emit_report(const std::vector<ReportRow>& rows, ReportFormat format);

// Inverse of the CSV form. Throws ParseError.
std::vector<ReportRow> parse_report_csv(std::string_view text);

}  // namespace droute
