#pragma once

// Sweep analysis: pairs every sample-cuvette measurement with the solvent
// measurement taken at the same arm, delay, pump power and replica, then
// applies the slope scheme, the correlation-function scheme and the
// slope-ratio scheme per (arm, delay, concentration).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "etpa/core.hpp"
#include "etpa/estimators.hpp"
#include "etpa/forward_model.hpp"
#include "etpa/linear_fit.hpp"
#include "etpa/montecarlo.hpp"

namespace etpa {

struct Observation {
  Arm arm = Arm::sample;
  double delay_tau = 0.0;
  double concentration = 0.0;
  double pump_power = 0.0;
  std::uint64_t run_id = 0;
  CorrectedRates rates;
};

/// One point of a plot series.
struct SeriesPoint {
  double x = 0.0;
  double y = 0.0;
  double yerr = 0.0;
};

struct GroupAnalysis {
  Arm arm = Arm::sample;
  double delay_tau = 0.0;
  double concentration = 0.0;

  double reference_factor = 1.0;  ///< drift correction applied to this group (1 = none)
  Measurement g2_signal;          ///< weighted mean of 1 - g2_solv / g2_sam
  std::optional<Measurement> slope_signal;
  std::optional<CrossSectionEstimate> sigma_cc;
  std::optional<CrossSectionEstimate> sigma_sc;
  std::optional<CrossSectionEstimate> sigma_g2;
  std::optional<CrossSectionEstimate> sigma_slope_ratio;
  double bound = 0.0;              ///< sensitivity bound at this concentration
  double mean_solvent_singles = 0.0;

  std::vector<SeriesPoint> signal_vs_flux;       ///< x: solvent singles R1+R2
  std::vector<SeriesPoint> absorbed_singles;     ///< x: solvent singles, y: solvent - sample
  std::vector<SeriesPoint> absorbed_coincidences;
};

struct ReportRow {
  double concentration = 0.0;
  std::optional<CrossSectionEstimate> sigma_cc;
  std::optional<CrossSectionEstimate> sigma_sc;
  std::optional<CrossSectionEstimate> sigma_g2;
  std::optional<CrossSectionEstimate> sigma_slope_ratio;
  double bound = 0.0;
};

struct AnalysisResult {
  std::vector<GroupAnalysis> groups;
  std::vector<ReportRow> table;  ///< sample arm at the delay closest to zero
  double table_delay = 0.0;
};

inline std::vector<Observation> observations_from_records(const std::vector<CountRecord>& records,
                                                          const ExperimentConfig& cfg) {
  std::vector<Observation> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const RateTriple raw = rates_from_record(r, cfg.detector.coincidence_window_tau_c, cfg.analysis);
    out.push_back({r.arm, r.delay_tau, r.concentration, r.pump_power, r.run_id, corrected_rates(raw)});
  }
  return out;
}

/// Noise-free observations straight from the forward model (errors are the
/// Poisson errors expected for the configured integration time).
inline std::vector<Observation> observations_from_model(const ExperimentConfig& cfg) {
  std::vector<Observation> out;
  for (const auto& pt : sweep_points(cfg.sweep)) {
    const RateTriple r = model_point(cfg, pt).rates;
    out.push_back({pt.arm, pt.delay_tau, pt.concentration, pt.pump_power, 0, corrected_rates(r)});
  }
  return out;
}

namespace detail {

using PointKey = std::tuple<double, std::uint64_t>;  // pump power, replica
using SeriesKey = std::tuple<int, double, double>;   // arm, delay, concentration

inline std::optional<Measurement> fitted_slope(const std::vector<DataPoint>& pts) {
  try {
    return weighted_linear_fit(pts).slope();
  } catch (const FitError&) {
    return std::nullopt;
  }
}

inline double total_singles(const CorrectedRates& r) { return r.r1 + r.r2; }
inline double total_singles_err(const CorrectedRates& r) { return std::hypot(r.err1, r.err2); }

}  // namespace detail

inline AnalysisResult analyze_observations(const std::vector<Observation>& obs, const ExperimentConfig& cfg) {
  using namespace detail;
  std::map<SeriesKey, std::map<PointKey, CorrectedRates>> series;
  std::set<double> concentrations;
  for (const auto& o : obs) {
    series[{static_cast<int>(o.arm), o.delay_tau, o.concentration}][{o.pump_power, o.run_id}] = o.rates;
    if (o.concentration > 0.0) concentrations.insert(o.concentration);
  }
  if (concentrations.empty())
    throw ValidationError("sweep.concentrations", "no sample concentrations to analyze (only solvent rows)");

  const double length = cfg.path_length();
  const double tau_c = cfg.detector.coincidence_window_tau_c;
  AnalysisResult result;

  for (const auto& [key, sam_points] : series) {
    const auto [arm_i, delay, c] = key;
    if (c == 0.0) continue;
    const Arm arm = static_cast<Arm>(arm_i);
    auto solv_it = series.find({arm_i, delay, 0.0});
    if (solv_it == series.end())
      throw ValidationError("solvent", "missing solvent baseline for arm " + std::string(to_string(arm)) +
                                           " at delay " + std::to_string(delay) + " fs");
    const auto& solv_points = solv_it->second;

    std::vector<PointKey> keys;
    for (const auto& [k, v] : sam_points)
      if (solv_points.count(k)) keys.push_back(k);
    if (keys.empty())
      throw ValidationError("solvent", "no solvent measurement aligned with the sample sweep points");

    std::vector<CorrectedRates> solv, sam;
    for (const auto& k : keys) {
      solv.push_back(solv_points.at(k));
      sam.push_back(sam_points.at(k));
    }

    GroupAnalysis g;
    g.arm = arm;
    g.delay_tau = delay;
    g.concentration = c;

    // Reference-arm drift correction of the sample arm.
    double rel_f = 0.0;
    if (arm == Arm::sample && cfg.analysis.reference_correction) {
      auto ref_solv = series.find({static_cast<int>(Arm::reference), delay, 0.0});
      auto ref_conc = series.find({static_cast<int>(Arm::reference), delay, c});
      if (ref_solv != series.end() && ref_conc != series.end()) {
        std::vector<CorrectedRates> rs, rc;
        bool aligned = true;
        for (const auto& k : keys) {
          if (!ref_solv->second.count(k) || !ref_conc->second.count(k)) {
            aligned = false;
            break;
          }
          rs.push_back(ref_solv->second.at(k));
          rc.push_back(ref_conc->second.at(k));
        }
        if (aligned) {
          auto corrected = reference_correction(sam, rs, rc);
          g.reference_factor = corrected.factor;
          rel_f = corrected.relative_factor_error();
          sam = std::move(corrected.sample);
        }
      }
    }

    std::vector<Measurement> signals;
    std::vector<DataPoint> abs_cc, abs_sc, tr1, tr2, tr12;
    double singles_sum = 0.0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& s = solv[i];
      const auto& m = sam[i];
      const double flux = total_singles(s);
      singles_sum += flux;

      const Measurement sig = etpa_signal_g2(g2_zero(s, tau_c), g2_zero(m, tau_c));
      signals.push_back(sig);
      g.signal_vs_flux.push_back({flux, sig.value, sig.error});

      const double abs_s = total_singles(s) - total_singles(m);
      const double abs_s_err = std::hypot(total_singles_err(s), total_singles_err(m));
      const double abs_c = s.r12 - m.r12;
      const double abs_c_err = std::hypot(s.err12, m.err12);
      g.absorbed_singles.push_back({flux, abs_s, abs_s_err});
      g.absorbed_coincidences.push_back({s.r12, abs_c, abs_c_err});
      abs_sc.push_back({flux, abs_s, abs_s_err});
      abs_cc.push_back({s.r12, abs_c, abs_c_err});
      tr1.push_back({s.r1, m.r1, m.err1});
      tr2.push_back({s.r2, m.r2, m.err2});
      tr12.push_back({s.r12, m.r12, m.err12});
    }
    g.mean_solvent_singles = singles_sum / static_cast<double>(keys.size());
    // The factor is shared by every point, so its error enters after averaging.
    g.g2_signal = with_factor_uncertainty(weighted_mean(signals), rel_f);
    g.sigma_g2 = sigma_from_g2(g.g2_signal, c, length);
    g.bound = sensitivity_bound(g.mean_solvent_singles, c, length);

    if (auto m = fitted_slope(abs_cc))
      g.sigma_cc = sigma_standard(with_factor_uncertainty(*m, rel_f), c, length, EstimateMethod::standard_coincidence);
    if (auto m = fitted_slope(abs_sc))
      g.sigma_sc = sigma_standard(with_factor_uncertainty(*m, rel_f), c, length, EstimateMethod::standard_singles);
    auto m1 = fitted_slope(tr1), m2 = fitted_slope(tr2), m12 = fitted_slope(tr12);
    if (m1 && m2 && m12 && m12->value != 0.0) {
      g.slope_signal = with_factor_uncertainty(etpa_signal_slopes(*m1, *m2, *m12), rel_f);
      g.sigma_slope_ratio = sigma_from_slopes(*g.slope_signal, c, length);
    }
    result.groups.push_back(std::move(g));
  }

  // Table: sample arm at the delay closest to zero.
  std::optional<double> table_delay;
  for (const auto& g : result.groups)
    if (g.arm == Arm::sample && (!table_delay || std::abs(g.delay_tau) < std::abs(*table_delay)))
      table_delay = g.delay_tau;
  if (table_delay) {
    result.table_delay = *table_delay;
    for (const auto& g : result.groups)
      if (g.arm == Arm::sample && g.delay_tau == *table_delay)
        result.table.push_back({g.concentration, g.sigma_cc, g.sigma_sc, g.sigma_g2, g.sigma_slope_ratio, g.bound});
  }
  return result;
}

inline AnalysisResult analyze_records(const std::vector<CountRecord>& records, const ExperimentConfig& cfg) {
  return analyze_observations(observations_from_records(records, cfg), cfg);
}

/// Groups of one arm and delay, in ascending concentration.
inline std::vector<const GroupAnalysis*> select_groups(const AnalysisResult& r, Arm arm, double delay) {
  std::vector<const GroupAnalysis*> out;
  for (const auto& g : r.groups)
    if (g.arm == arm && g.delay_tau == delay) out.push_back(&g);
  return out;
}

/// Two measurements agree when their difference is within k combined standard deviations.
inline bool statistically_compatible(const Measurement& a, const Measurement& b, double k = 2.0) {
  return std::abs(a.value - b.value) <= k * std::hypot(a.error, b.error);
}

}  // namespace etpa
