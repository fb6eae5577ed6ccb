#include "droute/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "droute/error.hpp"

namespace droute {
namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::optional<double> rounded(std::optional<double> v, double factor = 1.0) {
  if (!v) return std::nullopt;
  return std::strtod(format_value(*v * factor).c_str(), nullptr);
}

std::vector<std::string> cells(const ReportRow& r) {
  auto f = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
  return {r.group, std::to_string(r.count), f(r.mean_obj), f(r.mean_gap), f(r.obj_star), f(r.gap_star),
          f(r.worst_group_gap), f(r.time_s)};
}

std::optional<double> parse_cell(const std::string& s, std::size_t lineno) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw ParseError("report line " + std::to_string(lineno) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format: " + std::string(text));
}

std::vector<ReportRow> report_rows(const Metrics& m) {
  std::vector<ReportRow> rows;
  std::size_t total = 0;
  for (const auto& g : m.groups) {
    ReportRow r;
    r.group = g.label;
    r.count = g.count;
    r.mean_obj = rounded(g.mean_obj);
    r.mean_gap = rounded(g.mean_gap, 100.0);
    if (g.atypical) {
      r.obj_star = r.mean_obj;
      r.gap_star = r.mean_gap;
    }
    r.time_s = rounded(g.time_s);
    rows.push_back(std::move(r));
    total += g.count;
  }
  ReportRow s;
  s.group = std::string(kSummaryRow);
  s.count = total;
  s.mean_obj = rounded(m.mean_obj);
  s.mean_gap = rounded(m.mean_gap, 100.0);
  s.obj_star = rounded(m.obj_star);
  s.gap_star = rounded(m.gap_star, 100.0);
  s.worst_group_gap = rounded(m.worst_group_gap, 100.0);
  s.time_s = rounded(m.time_s);
  rows.push_back(std::move(s));
  return rows;
}

std::string emit_report(const Metrics& metrics, ReportFormat format) {
  return emit_report(report_rows(metrics), format);
}

std::string emit_report(const std::vector<ReportRow>& rows, ReportFormat format) {
  std::ostringstream out;
  const char* sep = format == ReportFormat::csv ? "," : " | ";
  auto line = [&](const std::vector<std::string>& c) {
    if (format == ReportFormat::markdown) out << "| ";
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? sep : "") << c[i];
    out << (format == ReportFormat::markdown ? " |\n" : "\n");
  };
  line(std::vector<std::string>(std::begin(kReportColumns), std::end(kReportColumns)));
  if (format == ReportFormat::markdown) line({"---", "---:", "---:", "---:", "---:", "---:", "---:", "---:"});
  for (const auto& r : rows) {
    if (r.group.find_first_of(",|\n") != std::string::npos) {
      throw ContractError("group label cannot be written to a report: " + r.group);
    }
    line(cells(r));
  }
  return out.str();
}

std::vector<ReportRow> parse_report_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> c;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      c.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (c.size() != std::size(kReportColumns)) {
      throw ParseError("report line " + std::to_string(lineno) + ": expected 8 columns");
    }
    if (lineno == 1) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] != kReportColumns[i]) throw ParseError("report header does not match the column layout");
      }
      continue;
    }
    ReportRow r;
    r.group = c[0];
    const auto count = parse_cell(c[1], lineno);
    if (!count || *count < 0) throw ParseError("report line " + std::to_string(lineno) + ": bad count");
    r.count = static_cast<std::size_t>(*count);
    r.mean_obj = parse_cell(c[2], lineno);
    r.mean_gap = parse_cell(c[3], lineno);
    r.obj_star = parse_cell(c[4], lineno);
    r.gap_star = parse_cell(c[5], lineno);
    r.worst_group_gap = parse_cell(c[6], lineno);
    r.time_s = parse_cell(c[7], lineno);
    rows.push_back(std::move(r));
  }
  if (lineno == 0) throw ParseError("empty report");
  return rows;
}

}  // namespace droute
