#include "lsf/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lsf::eval {

namespace {

std::string cell(double v) {
  if (std::isnan(v)) return "-";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string render_text(const Report& r) {
  std::size_t label_w = 5;
  for (const auto& row : r.rows) label_w = std::max(label_w, row.label.size());
  std::vector<std::size_t> widths;
  for (const auto& c : r.columns) widths.push_back(std::max<std::size_t>(c.size(), 8));
  std::ostringstream out;
  out << "# " << r.title << '\n';
  auto pad = [&out](const std::string& s, std::size_t w) { out << s << std::string(w > s.size() ? w - s.size() : 0, ' '); };
  pad("label", label_w);
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    out << "  ";
    pad(r.columns[i], widths[i]);
  }
  out << '\n';
  for (const auto& row : r.rows) {
    pad(row.label, label_w);
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
      const auto it = row.values.find(r.columns[i]);
      out << "  ";
      pad(it == row.values.end() ? std::string("-") : cell(it->second), widths[i]);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_jsonl(const Report& r) {
  std::ostringstream out;
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    j["report"] = r.title;
    j["label"] = row.label;
    nlohmann::ordered_json vals = nlohmann::ordered_json::object();
    for (const auto& [k, v] : row.values) {
      // JSON has no infinities; keep them as strings.
      if (std::isfinite(v)) {
        vals[k] = v;
      } else {
        vals[k] = std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
      }
    }
    j["values"] = vals;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<ReportRow> parse_jsonl(const std::string& text) {
  std::vector<ReportRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ReportRow row;
    row.label = j.at("label").get<std::string>();
    for (const auto& [k, v] : j.at("values").items()) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        row.values[k] = s == "inf" ? HUGE_VAL : s == "-inf" ? -HUGE_VAL : std::nan("");
      } else {
        row.values[k] = v.get<double>();
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_report(const Report& r, const std::string& prefix) {
  for (const auto& [ext, body] : {std::pair{std::string(".txt"), render_text(r)}, std::pair{std::string(".jsonl"), render_jsonl(r)}}) {
    std::ofstream out(prefix + ext, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + prefix + ext);
    out << body;
  }
}

}  // namespace lsf::eval
