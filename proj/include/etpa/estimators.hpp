#pragma once

// Analysis mathematics: dark/accidental correction, g2(0), biphoton rate,
// the slope and correlation-function cross-section schemes, the transmission
// sensitivity bound, reference-arm drift correction and Poisson error
// propagation. First-order (delta-method) errors throughout.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "etpa/core.hpp"
#include "etpa/linear_fit.hpp"

namespace etpa {

/// Dark- and accidental-subtracted rates with their propagated errors.
struct CorrectedRates {
  double r1 = 0.0, r2 = 0.0, r12 = 0.0;
  double err1 = 0.0, err2 = 0.0, err12 = 0.0;

  double rel1() const { return err1 / r1; }
  double rel2() const { return err2 / r2; }
  double rel12() const { return err12 / r12; }

  CorrectedRates scaled(double f) const {
    return {f * r1, f * r2, f * r12, f * err1, f * err2, f * err12};
  }
};

inline CorrectedRates corrected_rates(const RateTriple& raw) {
  CorrectedRates c{raw.r1 - raw.phi1,
                   raw.r2 - raw.phi2,
                   raw.r12 - raw.phi12,
                   std::hypot(raw.err1, raw.phi_err1),
                   std::hypot(raw.err2, raw.phi_err2),
                   std::hypot(raw.err12, raw.phi_err12)};
  if (!(c.r1 > 0.0)) throw DegenerateRateError("corrected singles rate R1 <= 0");
  if (!(c.r2 > 0.0)) throw DegenerateRateError("corrected singles rate R2 <= 0");
  if (!(c.r12 > 0.0)) throw DegenerateRateError("corrected coincidence rate R12 <= 0");
  return c;
}

/// Rates and baselines of a counting record. Accidentals are tau_c * R1 * R2
/// computed from the raw singles, or a supplied measured rate.
inline RateTriple rates_from_record(const CountRecord& rec, double tau_c_ns,
                                    const AnalysisOptions& opts = {}) {
  const double t = rec.integration_time;
  if (!(t > 0.0)) throw ValidationError("integration_time", "must be > 0");
  RateTriple r;
  r.r1 = rec.singles1 / t;
  r.r2 = rec.singles2 / t;
  r.r12 = rec.coincidences / t;
  r.err1 = std::sqrt(static_cast<double>(rec.singles1)) / t;
  r.err2 = std::sqrt(static_cast<double>(rec.singles2)) / t;
  r.err12 = std::sqrt(static_cast<double>(rec.coincidences)) / t;
  r.phi1 = rec.dark1 / t;
  r.phi2 = rec.dark2 / t;
  r.phi_err1 = std::sqrt(static_cast<double>(rec.dark1)) / t;
  r.phi_err2 = std::sqrt(static_cast<double>(rec.dark2)) / t;
  if (opts.accidentals == AccidentalsMode::measured) {
    r.phi12 = opts.measured_accidentals_rate;
  } else {
    r.phi12 = tau_c_ns * kSecondsPerNanosecond * r.r1 * r.r2;
    const double rel = std::hypot(r.r1 > 0 ? r.err1 / r.r1 : 0.0, r.r2 > 0 ? r.err2 / r.r2 : 0.0);
    r.phi_err12 = r.phi12 * rel;
  }
  return r;
}

/// Normalized second-order correlation at zero delay, R12 / (tau_c R1 R2).
inline Measurement g2_zero(const CorrectedRates& c, double tau_c_ns) {
  const double denom = tau_c_ns * kSecondsPerNanosecond * c.r1 * c.r2;
  if (!(denom > 0.0)) throw DegenerateRateError("g2: zero denominator");
  const double g = c.r12 / denom;
  return {g, std::abs(g) * std::sqrt(c.rel1() * c.rel1() + c.rel2() * c.rel2() +
                                      (c.r12 != 0.0 ? c.rel12() * c.rel12() : 0.0))};
}

/// Pair rate reaching the cuvette, independent of linear losses.
inline Measurement biphoton_rate(const CorrectedRates& c, const ChannelParams& ch) {
  if (!(c.r12 > 0.0)) throw DegenerateRateError("biphoton rate: zero coincidences");
  const double v = ch.beta12 / (ch.beta1 * ch.beta2) * c.r1 * c.r2 / c.r12;
  return {v, v * std::sqrt(c.rel1() * c.rel1() + c.rel2() * c.rel2() + c.rel12() * c.rel12())};
}

/// Fraction of pairs absorbed, 1 - g2_solv / g2_sam. May be negative.
inline Measurement etpa_signal_g2(const Measurement& solv, const Measurement& sam) {
  if (sam.value == 0.0) throw DegenerateRateError("ETPA signal: zero sample g2");
  const double ratio = solv.value / sam.value;
  const double rel = std::hypot(solv.value != 0.0 ? solv.error / solv.value : 0.0, sam.error / sam.value);
  return {1.0 - ratio, std::abs(ratio) * rel};
}

/// Fraction of pairs absorbed from the transmission slopes, 1 - m1 m2 / m12.
inline Measurement etpa_signal_slopes(const Measurement& m1, const Measurement& m2, const Measurement& m12) {
  if (m12.value == 0.0) throw DegenerateRateError("slope signal: m12 = 0");
  const double ratio = m1.value * m2.value / m12.value;
  auto rel = [](const Measurement& m) { return m.value != 0.0 ? m.error / m.value : 0.0; };
  const double r = std::sqrt(rel(m1) * rel(m1) + rel(m2) * rel(m2) + rel(m12) * rel(m12));
  return {1.0 - ratio, std::abs(ratio) * r};
}

inline double etpa_signal_slopes(double m1, double m2, double m12) {
  return etpa_signal_slopes(Measurement{m1, 0.0}, Measurement{m2, 0.0}, Measurement{m12, 0.0}).value;
}

namespace detail {
inline double checked_molecules_per_area(double c, double l) {
  if (!(c > 0.0)) throw ValidationError("concentration", "must be > 0 for a cross-section");
  return molecules_per_area(c, l);
}
}  // namespace detail

/// Cross-section from the correlation-function signal.
inline CrossSectionEstimate sigma_from_g2(const Measurement& signal, double concentration, double path_length) {
  const double n = detail::checked_molecules_per_area(concentration, path_length);
  return {signal.value / n, signal.error / n, EstimateMethod::g2, concentration};
}

/// Cross-section from the slope of absorbed vs incident rate.
inline CrossSectionEstimate sigma_standard(const Measurement& slope, double concentration, double path_length,
                                           EstimateMethod method = EstimateMethod::standard_coincidence) {
  const double n = detail::checked_molecules_per_area(concentration, path_length);
  return {slope.value / n, slope.error / n, method, concentration};
}

/// Cross-section from the slope-ratio signal.
inline CrossSectionEstimate sigma_from_slopes(const Measurement& signal, double concentration, double path_length) {
  const double n = detail::checked_molecules_per_area(concentration, path_length);
  return {signal.value / n, signal.error / n, EstimateMethod::slope_ratio, concentration};
}

/// Smallest cross-section a Poisson-limited transmission measurement can
/// resolve: b / (c l N_A) with b = 1/sqrt(R_solv).
inline double sensitivity_bound(double r_solv, double concentration, double path_length) {
  if (!(r_solv > 0.0)) throw ValidationError("r_solv", "must be > 0");
  const double n = detail::checked_molecules_per_area(concentration, path_length);
  return (1.0 / std::sqrt(r_solv)) / n;
}

// ---------------------------------------------------------------------------
// Reference-arm drift correction

/// Mean over sweep points of R_ref,solv / R_ref,conc.
inline double reference_correction_factor(std::span<const double> ref_solvent, std::span<const double> ref_conc) {
  if (ref_solvent.size() != ref_conc.size() || ref_solvent.empty())
    throw ValidationError("reference_series", "solvent and sample reference series must be aligned and nonempty");
  double sum = 0.0;
  for (std::size_t i = 0; i < ref_solvent.size(); ++i) {
    if (!(ref_conc[i] > 0.0) || !(ref_solvent[i] > 0.0))
      throw DegenerateRateError("reference correction: zero reference rate");
    sum += ref_solvent[i] / ref_conc[i];
  }
  return sum / static_cast<double>(ref_solvent.size());
}

struct ReferenceCorrected {
  double factor = 1.0;
  double factor_error = 0.0;  ///< standard error of the factor from the reference counting noise
  std::vector<CorrectedRates> sample;

  double relative_factor_error() const { return factor_error / factor; }
};

/// Scales the sample-arm series by the reference-arm drift factor. The factor
/// is built from the reference singles (R1 + R2) and applied to singles and
/// coincidences alike.
inline ReferenceCorrected reference_correction(std::span<const CorrectedRates> sample,
                                               std::span<const CorrectedRates> ref_solvent,
                                               std::span<const CorrectedRates> ref_conc) {
  if (sample.size() != ref_conc.size())
    throw ValidationError("sample_series", "sample and reference series lengths differ");
  std::vector<double> solv(ref_solvent.size()), conc(ref_conc.size());
  for (std::size_t i = 0; i < solv.size(); ++i) solv[i] = ref_solvent[i].r1 + ref_solvent[i].r2;
  for (std::size_t i = 0; i < conc.size(); ++i) conc[i] = ref_conc[i].r1 + ref_conc[i].r2;
  ReferenceCorrected out;
  out.factor = reference_correction_factor(solv, conc);
  double var = 0.0;
  for (std::size_t i = 0; i < solv.size(); ++i) {
    const double q = solv[i] / conc[i];
    const double rel_s = std::hypot(ref_solvent[i].err1, ref_solvent[i].err2) / solv[i];
    const double rel_c = std::hypot(ref_conc[i].err1, ref_conc[i].err2) / conc[i];
    var += q * q * (rel_s * rel_s + rel_c * rel_c);
  }
  out.factor_error = std::sqrt(var) / static_cast<double>(solv.size());
  out.sample.reserve(sample.size());
  for (const auto& s : sample) out.sample.push_back(s.scaled(out.factor));
  return out;
}

/// Adds the drift-factor uncertainty to a quantity of the form 1 - f * x.
inline Measurement with_factor_uncertainty(const Measurement& q, double relative_factor_error) {
  return {q.value, std::hypot(q.error, (1.0 - q.value) * relative_factor_error)};
}

// ---------------------------------------------------------------------------
// Poisson error propagation from raw counts

enum class PoissonExpression {
  single_rate,     ///< counts = {N}; value N/T
  g2_zero,         ///< counts = {N1, N2, N12}
  biphoton_rate,   ///< counts = {N1, N2, N12}, default beamsplitter routing
  etpa_signal_g2,  ///< counts = {N1, N2, N12} solvent then {N1, N2, N12} sample
};

/// sqrt(sum 1/N) over the nonzero counts.
inline double relative_poisson_error(std::span<const std::uint64_t> counts) {
  double s = 0.0;
  for (auto n : counts)
    if (n > 0) s += 1.0 / static_cast<double>(n);
  return std::sqrt(s);
}

/// First-order propagation with var(N) = N for counts already corrected for baselines.
inline Measurement propagate_poisson_error(std::span<const std::uint64_t> counts, PoissonExpression expr,
                                           double integration_time, double tau_c_ns = 1.05) {
  const double t = integration_time;
  auto need = [&](std::size_t n) {
    if (counts.size() != n) throw ValidationError("counts", "wrong number of counts for expression");
  };
  auto g2_of = [&](std::span<const std::uint64_t> c) {
    const double denom = tau_c_ns * kSecondsPerNanosecond * (c[0] / t) * (c[1] / t);
    if (!(denom > 0.0)) throw DegenerateRateError("g2: zero singles");
    return (c[2] / t) / denom;
  };
  switch (expr) {
    case PoissonExpression::single_rate:
      need(1);
      return {counts[0] / t, std::sqrt(static_cast<double>(counts[0])) / t};
    case PoissonExpression::g2_zero: {
      need(3);
      const double g = g2_of(counts);
      return {g, g * relative_poisson_error(counts)};
    }
    case PoissonExpression::biphoton_rate: {
      need(3);
      if (counts[2] == 0) throw DegenerateRateError("biphoton rate: zero coincidences");
      const ChannelParams ch;
      const double v = ch.beta12 / (ch.beta1 * ch.beta2) * (counts[0] / t) * (counts[1] / t) / (counts[2] / t);
      return {v, v * relative_poisson_error(counts)};
    }
    case PoissonExpression::etpa_signal_g2: {
      need(6);
      const double ratio = g2_of(counts.first(3)) / g2_of(counts.subspan(3, 3));
      return {1.0 - ratio, std::abs(ratio) * relative_poisson_error(counts)};
    }
  }
  return {};
}

/// Inverse-variance weighted mean of independent measurements.
inline Measurement weighted_mean(std::span<const Measurement> values) {
  double sw = 0.0, swx = 0.0;
  for (const auto& m : values) {
    if (!(m.error > 0.0)) continue;
    const double w = 1.0 / (m.error * m.error);
    sw += w;
    swx += w * m.value;
  }
  if (sw == 0.0) throw DegenerateRateError("weighted mean: no point carries a positive error");
  return {swx / sw, 1.0 / std::sqrt(sw)};
}

}  // namespace etpa
