#pragma once

// Count-record CSV files.
//
// One flat schema serves simulated and ingested data:
//
//   # units: delay_fs=fs pump_mw=mW concentration_molar=M integration_s=s
//   run_id,arm,delay_fs,pump_mw,concentration_molar,integration_s,singles1,singles2,coincidences,dark1,dark2,seed
//
// Lines starting with '#' are comments. A "# units:" comment may declare
// non-default units for the four physical columns; values are converted to
// fs, mW, mol/L and s on ingestion.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "etpa/core.hpp"

namespace etpa {

inline constexpr const char* kCsvHeader =
    "run_id,arm,delay_fs,pump_mw,concentration_molar,integration_s,singles1,singles2,coincidences,dark1,dark2,seed";
inline constexpr const char* kCsvUnitsLine =
    "# units: delay_fs=fs pump_mw=mW concentration_molar=M integration_s=s";

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_counts_csv(std::ostream& out, const std::vector<CountRecord>& records) {
  out << kCsvUnitsLine << '\n' << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.run_id << ',' << to_string(r.arm) << ',' << format_double(r.delay_tau) << ','
        << format_double(r.pump_power) << ',' << format_double(r.concentration) << ','
        << format_double(r.integration_time) << ',' << r.singles1 << ',' << r.singles2 << ',' << r.coincidences
        << ',' << r.dark1 << ',' << r.dark2 << ',' << r.seed << '\n';
  }
}

inline void write_counts_csv(const std::string& path, const std::vector<CountRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_counts_csv(out, records);
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Diagnostic {
  enum class Level { warning, rejected_row } level = Level::warning;
  std::size_t line = 0;  ///< 1-based; 0 for file-level messages
  std::string column;
  std::string message;
};

struct IngestResult {
  std::vector<CountRecord> records;
  std::vector<Diagnostic> diagnostics;

  std::size_t rejected_rows() const {
    std::size_t n = 0;
    for (const auto& d : diagnostics) n += d.level == Diagnostic::Level::rejected_row;
    return n;
  }
};

/// Header or units that do not match the documented schema.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> unit_scale(const std::string& column, const std::string& unit) {
  static const std::map<std::string, std::map<std::string, double>> table = {
      {"delay_fs", {{"fs", 1.0}, {"ps", 1e3}, {"as", 1e-3}}},
      {"pump_mw", {{"mW", 1.0}, {"W", 1e3}, {"uW", 1e-3}}},
      {"concentration_molar", {{"M", 1.0}, {"molar", 1.0}, {"mM", 1e-3}, {"uM", 1e-6}, {"nM", 1e-9}}},
      {"integration_s", {{"s", 1.0}, {"ms", 1e-3}, {"min", 60.0}}},
  };
  auto col = table.find(column);
  if (col == table.end()) return std::nullopt;
  auto u = col->second.find(unit);
  if (u == col->second.end()) return std::nullopt;
  return u->second;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
  } else {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }
}

}  // namespace detail

/// Parses and validates a count CSV. Schema problems throw SchemaError with one
/// issue per offending column; bad rows are dropped with a diagnostic.
inline IngestResult ingest_counts_csv(std::istream& in) {
  static const std::vector<std::string> required = {"arm", "delay_fs", "pump_mw", "concentration_molar",
                                                    "integration_s", "singles1", "singles2", "coincidences"};
  static const std::vector<std::string> optional_cols = {"run_id", "dark1", "dark2", "seed"};

  IngestResult result;
  std::map<std::string, double> scale = {
      {"delay_fs", 1.0}, {"pump_mw", 1.0}, {"concentration_molar", 1.0}, {"integration_s", 1.0}};
  std::vector<std::string> header;
  std::map<std::string, std::size_t> col;
  std::string line;
  std::size_t lineno = 0;
  std::vector<ValidationIssue> schema_issues;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("units:");
      if (pos == std::string::npos) continue;
      std::istringstream ss(line.substr(pos + 6));
      std::string decl;
      while (ss >> decl) {
        const auto eq = decl.find('=');
        if (eq == std::string::npos) {
          schema_issues.push_back({"units", "malformed declaration '" + decl + "'"});
          continue;
        }
        const std::string name = decl.substr(0, eq), unit = decl.substr(eq + 1);
        if (auto s = detail::unit_scale(name, unit))
          scale[name] = *s;
        else
          schema_issues.push_back({name, "unsupported unit '" + unit + "'"});
      }
      continue;
    }

    if (header.empty()) {
      header = detail::split_csv_line(line);
      for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& name = header[i];
        const bool known = std::find(required.begin(), required.end(), name) != required.end() ||
                           std::find(optional_cols.begin(), optional_cols.end(), name) != optional_cols.end();
        if (!known)
          schema_issues.push_back({name.empty() ? "column " + std::to_string(i + 1) : name, "unknown column"});
        else if (col.count(name))
          schema_issues.push_back({name, "duplicate column"});
        else
          col[name] = i;
      }
      for (const auto& name : required)
        if (!col.count(name)) schema_issues.push_back({name, "missing required column"});
      if (!schema_issues.empty()) throw SchemaError(std::move(schema_issues));
      for (const char* dark : {"dark1", "dark2"})
        if (!col.count(dark))
          result.diagnostics.push_back({Diagnostic::Level::warning, 0, dark, "column absent; dark counts taken as 0"});
      continue;
    }

    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      result.diagnostics.push_back({Diagnostic::Level::rejected_row, lineno, "",
                                    "expected " + std::to_string(header.size()) + " cells, found " +
                                        std::to_string(cells.size())});
      continue;
    }
    CountRecord rec;
    std::optional<Diagnostic> bad;
    auto reject = [&](const std::string& column, const std::string& msg) {
      if (!bad) bad = Diagnostic{Diagnostic::Level::rejected_row, lineno, column, msg};
    };
    auto get_real = [&](const std::string& name, double& target) {
      if (!detail::parse_number(cells[col.at(name)], target)) return reject(name, "not a number");
      target *= scale.at(name);
    };
    auto get_count = [&](const std::string& name, std::uint64_t& target) {
      if (!col.count(name)) return;
      if (!detail::parse_number(cells[col.at(name)], target)) reject(name, "not a nonnegative integer");
    };

    if (auto arm = parse_arm(cells[col.at("arm")]))
      rec.arm = *arm;
    else
      reject("arm", "must be 'sample' or 'reference'");
    get_real("delay_fs", rec.delay_tau);
    get_real("pump_mw", rec.pump_power);
    get_real("concentration_molar", rec.concentration);
    get_real("integration_s", rec.integration_time);
    get_count("run_id", rec.run_id);
    get_count("singles1", rec.singles1);
    get_count("singles2", rec.singles2);
    get_count("coincidences", rec.coincidences);
    get_count("dark1", rec.dark1);
    get_count("dark2", rec.dark2);
    get_count("seed", rec.seed);
    if (!bad) {
      if (rec.pump_power < 0.0) reject("pump_mw", "must be >= 0");
      if (rec.concentration < 0.0) reject("concentration_molar", "must be >= 0");
      if (!(rec.integration_time > 0.0)) reject("integration_s", "must be > 0");
      if (rec.coincidences > rec.singles1) reject("coincidences", "exceeds singles1");
      if (rec.coincidences > rec.singles2) reject("coincidences", "exceeds singles2");
    }
    if (bad)
      result.diagnostics.push_back(*bad);
    else
      result.records.push_back(rec);
  }
  if (header.empty()) {
    schema_issues.push_back({"header", "no header line found"});
    throw SchemaError(std::move(schema_issues));
  }
  if (!schema_issues.empty()) throw SchemaError(std::move(schema_issues));
  return result;
}

inline IngestResult ingest_counts_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return ingest_counts_csv(in);
}

}  // namespace etpa
