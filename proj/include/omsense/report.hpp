#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "omsense/core.hpp"
#include "omsense/sensitivity.hpp"

namespace omsense {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// A result table, optionally with a leading text column.
struct NamedTable {
  std::string name;
  Table table;
  std::string label_column;
  std::vector<std::string> labels;
};

inline std::string to_csv(const NamedTable &t) {
  std::string out;
  const bool labelled = !t.label_column.empty();
  if (labelled) out += t.label_column + ",";
  for (std::size_t c = 0; c < t.table.columns.size(); ++c) {
    if (c) out += ",";
    out += t.table.columns[c];
  }
  out += "\n";
  for (std::size_t r = 0; r < t.table.rows.size(); ++r) {
    if (labelled) out += t.labels[r] + ",";
    const auto &row = t.table.rows[r];
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ",";
      out += format_double(row[c]);
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline std::string to_json_text(const NamedTable &t) {
  nlohmann::json j;
  j["columns"] = t.table.columns;
  if (!t.label_column.empty()) {
    j["label_column"] = t.label_column;
    j["labels"] = t.labels;
  }
  auto rows = nlohmann::json::array();
  for (const auto &row : t.table.rows) {
    auto r = nlohmann::json::array();
    for (double v : row) r.push_back(number_or_null(v));
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j.dump(1) + "\n";
}

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

/// Two-column (frequency_hz, value) overlay file; a non-numeric first line is a header.
struct Overlay {
  std::string name;
  std::vector<double> frequency_hz;
  std::vector<double> value;

  /// Log-log interpolation inside the tabulated range, NaN outside.
  double at(double f) const {
    if (frequency_hz.size() < 2 || f < frequency_hz.front() || f > frequency_hz.back())
      return std::numeric_limits<double>::quiet_NaN();
    auto it = std::lower_bound(frequency_hz.begin(), frequency_hz.end(), f);
    std::size_t i = static_cast<std::size_t>(it - frequency_hz.begin());
    if (i == 0) return value.front();
    const double x0 = std::log(frequency_hz[i - 1]), x1 = std::log(frequency_hz[i]);
    const double y0 = std::log(value[i - 1]), y1 = std::log(value[i]);
    return std::exp(y0 + (y1 - y0) * (std::log(f) - x0) / (x1 - x0));
  }
};

inline Overlay read_overlay(const std::string &path, const std::string &text) {
  Overlay o;
  const auto slash = path.find_last_of('/');
  std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  o.name = "overlay_" + stem;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double f = 0.0, v = 0.0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lf , %lf %c", &f, &v, &tail) != 2 &&
        std::sscanf(line.c_str(), "%lf %lf %c", &f, &v, &tail) != 2) {
      if (line_no == 1) continue;
      throw ConfigurationError(path + ": line " + std::to_string(line_no) + " is not two numbers");
    }
    if (!(f > 0.0) || !(v > 0.0)) throw ConfigurationError(path + ": overlay values must be positive");
    if (!o.frequency_hz.empty() && !(f > o.frequency_hz.back()))
      throw ConfigurationError(path + ": overlay frequencies must be strictly increasing");
    o.frequency_hz.push_back(f);
    o.value.push_back(v);
  }
  if (o.frequency_hz.size() < 2) throw ConfigurationError(path + ": overlay needs at least two rows");
  return o;
}

} // namespace omsense
