#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfact/data/cohort.hpp"
#include "medfact/errors.hpp"

namespace medfact {

/// Which PSV columns are dynamic, static and the label, plus visit limits.
/// t_max == 0 means unlimited; longer records keep their last t_max visits.
struct Schema {
  std::vector<std::string> dynamic;
  std::vector<std::string> static_columns;
  std::string label = "SepsisLabel";
  std::size_t t_min = 1;
  std::size_t t_max = 0;
};

inline nlohmann::json to_json(const Schema& s) {
  return {{"dynamic", s.dynamic}, {"static", s.static_columns}, {"label", s.label},
          {"t_min", s.t_min},     {"t_max", s.t_max}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  try {
    s.dynamic = j.at("dynamic").get<std::vector<std::string>>();
    s.static_columns = j.value("static", std::vector<std::string>{});
    s.label = j.value("label", std::string("SepsisLabel"));
    s.t_min = j.value("t_min", std::size_t{1});
    s.t_max = j.value("t_max", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("schema: ") + e.what());
  }
  if (s.dynamic.empty()) throw FormatError("schema: no dynamic columns");
  if (s.t_min < 1) s.t_min = 1;
  if (s.t_max != 0 && s.t_max < s.t_min) throw FormatError("schema: t_max is smaller than t_min");
  return s;
}

inline Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("schema " + path.string() + ": " + e.what());
  }
}

namespace psv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto bar = line.find('|', start);
    if (bar == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, bar - start));
    start = bar + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NaN" || cell == "nan" || cell == "NAN" || cell == "NA";
}

/// Parses one cell; false on garbage.
inline bool parse_cell(std::string_view cell, double& out) {
  cell = trim(cell);
  if (is_missing(cell)) {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

/// Shortest text that reads back to the identical double; NaN as "NaN".
inline std::string format_cell(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace psv

/// Parses one patient file under `schema`. Returns false (and leaves
/// `record` untouched) when the patient has fewer than t_min visits.
inline bool parse_psv_record(std::istream& in, const std::string& source, const Schema& schema,
                             PatientRecord& record) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source + ": missing header line");
  const auto header = psv::split(psv::trim(line));
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (psv::trim(header[c]) == name) return c;
    throw FormatError(source + ": header lacks column '" + name + "'");
  };
  std::vector<std::size_t> dyn_cols, stat_cols;
  for (const auto& n : schema.dynamic) dyn_cols.push_back(column(n));
  for (const auto& n : schema.static_columns) stat_cols.push_back(column(n));
  const std::size_t label_col = column(schema.label);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> dyn_values;
  std::vector<double> static_values(stat_cols.size(), nan);
  std::vector<double> row(header.size());
  int label = 0;
  std::size_t visits = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = psv::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = psv::split(trimmed);
    if (cells.size() != header.size()) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!psv::parse_cell(cells[c], row[c])) {
        throw FormatError(source + ":" + std::to_string(line_no) + ": unparseable value '" +
                          std::string(cells[c]) + "' in column '" + std::string(psv::trim(header[c])) + "'");
      }
    }
    for (auto c : dyn_cols) dyn_values.push_back(row[c]);
    for (std::size_t s = 0; s < stat_cols.size(); ++s)
      if (std::isnan(static_values[s])) static_values[s] = row[stat_cols[s]];
    const double y = row[label_col];
    if (!std::isnan(y) && y != 0.0 && y != 1.0) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": label column '" + schema.label +
                        "' must be 0 or 1");
    }
    if (y == 1.0) label = 1;
    ++visits;
  }
  if (visits < schema.t_min) return false;

  const std::size_t f = dyn_cols.size();
  std::size_t first = 0;
  if (schema.t_max != 0 && visits > schema.t_max) first = visits - schema.t_max;
  const std::size_t kept = visits - first;
  Matrix dyn(kept, f);
  std::copy(dyn_values.begin() + static_cast<std::ptrdiff_t>(first * f), dyn_values.end(), dyn.data().begin());

  record.dynamic = std::move(dyn);
  record.static_values = std::move(static_values);
  record.label = label;
  return true;
}

/// Loads every *.psv file under `directory` (recursively, in path order).
/// Each file is one patient; the patient label is 1 when any visit's label
/// column is 1.
inline Cohort load_psv_cohort(const std::filesystem::path& directory, const Schema& schema) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) throw IoError("not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".psv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Cohort cohort;
  cohort.dynamic_names = schema.dynamic;
  cohort.static_names = schema.static_columns;
  cohort.records.reserve(files.size());
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    PatientRecord rec;
    rec.id = path.stem().string();
    if (parse_psv_record(in, path.string(), schema, rec))
      cohort.records.push_back(std::move(rec));
    else
      ++cohort.dropped_short;
  }
  return cohort;
}

/// Writes one file per record (`<id>.psv`) with header dynamic|static|label.
/// The patient label is repeated on every visit row and static values on
/// every row, so load_psv_cohort reproduces the cohort bit-exactly.
inline Schema write_psv_cohort(const Cohort& cohort, const std::filesystem::path& directory,
                               const std::string& label_column = "Label") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());

  std::string header;
  for (const auto& n : cohort.dynamic_names) header += n + "|";
  for (const auto& n : cohort.static_names) header += n + "|";
  header += label_column;

  for (const auto& rec : cohort.records) {
    const fs::path path = directory / (rec.id + ".psv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << header << '\n';
    std::string statics;
    for (double v : rec.static_values) statics += psv::format_cell(v) + "|";
    const std::string label = std::to_string(rec.label);
    for (std::size_t t = 0; t < rec.visit_count(); ++t) {
      std::string line;
      for (double v : rec.dynamic.row(t)) line += psv::format_cell(v) + "|";
      out << line << statics << label << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
  Schema schema;
  schema.dynamic = cohort.dynamic_names;
  schema.static_columns = cohort.static_names;
  schema.label = label_column;
  return schema;
}

}  // namespace medfact
