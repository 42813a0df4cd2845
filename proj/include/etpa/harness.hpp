#pragma once

// File-level workflows behind the command-line tool: simulate a sweep to CSV
// with a provenance manifest, analyze a counts CSV into report and plot-data
// files, and fit a delay scan.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "etpa/analysis.hpp"
#include "etpa/config.hpp"
#include "etpa/csv_io.hpp"
#include "etpa/hom_fit.hpp"
#include "etpa/montecarlo.hpp"

namespace etpa {

inline constexpr const char* kVersion = "0.3.0";

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

struct SimulationOutput {
  std::vector<CountRecord> records;
  nlohmann::json manifest;
};

/// Runs the plan and builds its provenance manifest.
inline SimulationOutput run_simulation(const SimulationPlan& plan) {
  SimulationOutput out;
  out.records = simulate(plan);
  const auto points = sweep_points(plan.config.sweep);
  nlohmann::json seeds = nlohmann::json::array();
  for (int r = 0; r < plan.replicas; ++r)
    seeds.push_back(record_seed(plan.base_seed, static_cast<std::uint64_t>(r), 0));
  out.manifest = {
      {"tool", "etpa"},
      {"version", kVersion},
      {"config_hash", detail::hex64(config_hash(plan.config))},
      {"config", config_to_json(plan.config)},
      {"mode", plan.mode == SimulationMode::rate_level ? "rate" : "event"},
      {"replicas", plan.replicas},
      {"base_seed", plan.base_seed},
      {"seed_derivation", "record_seed = mix64(mix64(mix64(base_seed) ^ replica) + sweep_index)"},
      {"first_record_seed_per_replica", seeds},
      {"sweep_points", points.size()},
      {"rows", out.records.size()},
  };
  return out;
}

/// Writes counts.csv and manifest.json into `out_dir`.
inline SimulationOutput run_simulation(const SimulationPlan& plan, const std::filesystem::path& out_dir) {
  SimulationOutput out = run_simulation(plan);
  detail::ensure_directory(out_dir);
  write_counts_csv((out_dir / "counts.csv").string(), out.records);
  auto m = detail::open_output(out_dir / "manifest.json");
  m << out.manifest.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// analyze

/// "3.27(0.18)e-20" style: mantissa and error share one power of ten.
inline std::string format_with_error(double value, double error) {
  const double ref = value != 0.0 ? std::abs(value) : std::abs(error);
  if (ref == 0.0 || !std::isfinite(ref)) return "0(0)";
  const int e = static_cast<int>(std::floor(std::log10(ref)));
  const double scale = std::pow(10.0, e);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f(%.2f)e%+03d", value / scale, error / scale, e);
  return buf;
}

inline void write_report_table_csv(std::ostream& out, const AnalysisResult& r) {
  out << "concentration_molar,sigma_cc,sigma_cc_err,sigma_sc,sigma_sc_err,sigma_g2,sigma_g2_err,"
         "sigma_slope_ratio,sigma_slope_ratio_err,g2_consistent_with_zero,sensitivity_bound\n";
  auto cell = [&](const std::optional<CrossSectionEstimate>& e) {
    if (e)
      out << format_double(e->value) << ',' << format_double(e->abs_error);
    else
      out << ',';
  };
  for (const auto& row : r.table) {
    out << format_double(row.concentration) << ',';
    cell(row.sigma_cc);
    out << ',';
    cell(row.sigma_sc);
    out << ',';
    cell(row.sigma_g2);
    out << ',';
    cell(row.sigma_slope_ratio);
    out << ',' << (row.sigma_g2 && row.sigma_g2->consistent_with_zero() ? "true" : "false") << ','
        << format_double(row.bound) << '\n';
  }
}

/// Human-readable table: concentration and the three cross-section columns.
inline void write_report_table_text(std::ostream& out, const AnalysisResult& r) {
  auto cell = [](const std::optional<CrossSectionEstimate>& e) -> std::string {
    if (!e) return "n/a";
    std::string s = format_with_error(e->value, e->abs_error);
    if (e->consistent_with_zero()) s += " *";
    return s;
  };
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-22s %-22s %-22s %-22s %-12s\n", "c (M)", "slope, coincidences",
                "slope, singles", "g2 ratio", "slope ratio", "bound");
  out << "sigma_E [cm^2/molecule], sample arm, delay " << format_double(r.table_delay) << " fs\n" << line;
  for (const auto& row : r.table) {
    char bound[32];
    std::snprintf(bound, sizeof bound, "%.3g", row.bound);
    std::snprintf(line, sizeof line, "%-14s %-22s %-22s %-22s %-22s %-12s\n", format_double(row.concentration).c_str(),
                  cell(row.sigma_cc).c_str(), cell(row.sigma_sc).c_str(), cell(row.sigma_g2).c_str(),
                  cell(row.sigma_slope_ratio).c_str(), bound);
    out << line;
  }
  out << "(* consistent with zero: |value| < error)\n";
}

inline std::string series_label(const GroupAnalysis& g) {
  return "arm=" + std::string(to_string(g.arm)) + ";delay_fs=" + format_double(g.delay_tau) +
         ";concentration_molar=" + format_double(g.concentration);
}

inline void write_series_csv(std::ostream& out, const AnalysisResult& r,
                             const std::vector<SeriesPoint> GroupAnalysis::*member, const std::string& suffix = "") {
  for (const auto& g : r.groups)
    for (const auto& p : g.*member)
      out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.yerr) << ','
          << series_label(g) << suffix << '\n';
}

/// Writes report_table.{csv,txt}, signal_vs_flux.csv, absorption_rates.csv and groups.csv.
inline void write_analysis(const AnalysisResult& r, const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);
  {
    auto out = detail::open_output(out_dir / "report_table.csv");
    write_report_table_csv(out, r);
  }
  {
    auto out = detail::open_output(out_dir / "report_table.txt");
    write_report_table_text(out, r);
  }
  {
    auto out = detail::open_output(out_dir / "signal_vs_flux.csv");
    out << "x,y,yerr,series\n";
    write_series_csv(out, r, &GroupAnalysis::signal_vs_flux);
  }
  {
    auto out = detail::open_output(out_dir / "absorption_rates.csv");
    out << "x,y,yerr,series\n";
    write_series_csv(out, r, &GroupAnalysis::absorbed_singles, ";counts=singles");
    write_series_csv(out, r, &GroupAnalysis::absorbed_coincidences, ";counts=coincidences");
  }
  {
    auto out = detail::open_output(out_dir / "groups.csv");
    out << "arm,delay_fs,concentration_molar,g2_signal,g2_signal_err,reference_factor,sigma_g2,sigma_g2_err,"
           "sensitivity_bound,mean_solvent_singles\n";
    for (const auto& g : r.groups)
      out << to_string(g.arm) << ',' << format_double(g.delay_tau) << ',' << format_double(g.concentration) << ','
          << format_double(g.g2_signal.value) << ',' << format_double(g.g2_signal.error) << ','
          << format_double(g.reference_factor) << ',' << format_double(g.sigma_g2->value) << ','
          << format_double(g.sigma_g2->abs_error) << ',' << format_double(g.bound) << ','
          << format_double(g.mean_solvent_singles) << '\n';
  }
}

// ---------------------------------------------------------------------------
// hom-fit

struct HomScanReport {
  HomFit fit;
  HomShape shape = HomShape::dip;
  std::vector<DataPoint> points;
};

/// Coincidence rate vs delay, pooling all rows of the chosen arm that share a delay.
inline std::vector<DataPoint> delay_scan_points(const std::vector<CountRecord>& records, std::optional<Arm> arm = {}) {
  std::map<double, std::pair<double, double>> pooled;  // delay -> (coincidences, seconds)
  for (const auto& r : records) {
    if (arm && r.arm != *arm) continue;
    auto& p = pooled[r.delay_tau];
    p.first += static_cast<double>(r.coincidences);
    p.second += r.integration_time;
  }
  std::vector<DataPoint> out;
  for (const auto& [delay, p] : pooled) {
    const double rate = p.first / p.second;
    const double err = std::sqrt(std::max(p.first, 1.0)) / p.second;
    out.push_back({delay, rate, err});
  }
  return out;
}

/// Dip when the central points sit below the edges, peak otherwise.
inline HomShape detect_hom_shape(const std::vector<DataPoint>& pts) {
  const auto init_dip = hom_initial_guess(pts, HomShape::dip);
  const auto init_peak = hom_initial_guess(pts, HomShape::peak);
  return std::abs(init_dip.d) >= std::abs(init_peak.d) ? HomShape::dip : HomShape::peak;
}

inline HomScanReport fit_hom_scan(const std::vector<CountRecord>& records, std::optional<HomShape> shape = {},
                                  std::optional<Arm> arm = {}) {
  HomScanReport rep;
  rep.points = delay_scan_points(records, arm);
  if (rep.points.size() < 7) throw FitError("HOM scan needs at least 7 distinct delays");
  rep.shape = shape.value_or(detect_hom_shape(rep.points));
  rep.fit = fit_hom_curve(rep.points, rep.shape);
  return rep;
}

inline nlohmann::json hom_report_json(const HomScanReport& rep) {
  const auto& c = rep.fit.curve;
  return {{"shape", rep.shape == HomShape::dip ? "dip" : "peak"},
          {"a", c.a},
          {"b_fs", c.b},
          {"c1_per_fs", c.c1},
          {"c2_fs", c.c2},
          {"d", c.d},
          {"visibility", c.visibility},
          {"visibility_overshoot", c.visibility_overshoot()},
          {"fwhm_fs", c.fwhm},
          {"center_to_baseline_ratio", c.center_ratio()},
          {"chi2", rep.fit.fit.chi2},
          {"dof", rep.fit.fit.dof},
          {"iterations", rep.fit.iterations}};
}

inline void write_hom_report(const HomScanReport& rep, const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);
  {
    auto out = detail::open_output(out_dir / "hom_fit.json");
    out << hom_report_json(rep).dump(2) << '\n';
  }
  auto out = detail::open_output(out_dir / "hom_curve.csv");
  out << "x,y,yerr,series\n";
  for (const auto& p : rep.points)
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.y_err) << ",data\n";
  const double lo = rep.points.front().x, hi = rep.points.back().x;
  for (int i = 0; i <= 400; ++i) {
    const double x = lo + (hi - lo) * i / 400.0;
    out << format_double(x) << ',' << format_double(hom_model(rep.fit.curve, x)) << ",0,fit\n";
  }
}

}  // namespace etpa
