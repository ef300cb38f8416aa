#pragma once

#include <map>
#include <string>
#include <vector>

namespace lsf::eval {

struct ReportRow {
  std::string label;
  std::map<std::string, double> values;
};

struct Report {
  std::string title;
  std::vector<std::string> columns;
  std::vector<ReportRow> rows;
};

// Fixed-width text table; a report with no rows renders its header only.
std::string render_text(const Report& r);

// One JSON object per row: {"report":..., "label":..., "values":{...}}.
std::string render_jsonl(const Report& r);
std::vector<ReportRow> parse_jsonl(const std::string& text);

// Writes <prefix>.txt and <prefix>.jsonl.
void emit_report(const Report& r, const std::string& prefix);

}  // namespace lsf::eval
