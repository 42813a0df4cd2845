#pragma once

// Noise-free rate predictions: pair flux after the HOM stage, survival in the
// sample cuvette, and the detected singles/coincidence rates.

#include <cmath>
#include <numbers>

#include "etpa/core.hpp"

namespace etpa {

/// Pair survival against ETPA (eps_etpa) and per-photon one-photon-loss survival (eta).
struct SurvivalFactors {
  double eps_etpa = 1.0;
  double eta_linear = 1.0;
};

/// 1/e half-width [fs] of the Gaussian HOM envelope whose FWHM equals T_e.
inline double hom_envelope_halfwidth_fs(double correlation_time_Te_ps) {
  return correlation_time_Te_ps * kFemtosecondsPerPicosecond / (2.0 * std::sqrt(std::numbers::ln2));
}

/// Pair rate [pairs/s] reaching the cuvette.
///
/// Collinear: every generated pair. Non-collinear: per output arm of the HOM
/// splitter, bunching doubles the rate at zero delay relative to |tau| >> T_e.
inline double pair_rate_at_cuvette(const SourceParams& source) {
  const double generated = source.pump_power * source.pairs_per_mw;
  if (source.geometry == Geometry::collinear) return generated;
  const double x = source.delay_tau / hom_envelope_halfwidth_fs(source.correlation_time_Te);
  return 0.25 * generated * (1.0 + source.hom_visibility * std::exp(-x * x));
}

/// Probability that a pair crosses the cuvette without being absorbed.
/// The ETPA cross-section is suppressed by exp(-(tau/T_e)^2) with intra-pair delay.
inline double etpa_survival(const SampleParams& sample, double tau_fs, double correlation_time_Te_ps) {
  const double c = sample.effective_concentration();
  if (c == 0.0 || sample.sigma_e_true == 0.0) return 1.0;
  const double x = tau_fs / (correlation_time_Te_ps * kFemtosecondsPerPicosecond);
  double eps = 1.0 - sample.sigma_e_true * std::exp(-x * x) * molecules_per_area(c, sample.path_length_l);
  if (eps < 0.0 && eps > -1e-12) eps = 0.0;  // rounding at full depletion
  if (!(eps >= 0.0 && eps <= 1.0)) throw ModelError("ETPA pair survival outside [0, 1]");
  return eps;
}

/// Beer-Lambert one-photon survival, applied independently to each photon of a pair.
inline double linear_survival(const SampleParams& sample) {
  const double c = sample.effective_concentration();
  return std::pow(10.0, -sample.linear_attenuation_alpha * c * sample.path_length_l);
}

/// Detected singles and coincidence rates for a given pair rate at the cuvette.
/// Accidentals are the uncorrelated-window estimate tau_c * R1 * R2.
inline RateTriple detected_rates(double pair_rate, const SurvivalFactors& surv, const ChannelParams& ch,
                                 const DetectorParams& det) {
  const double transmitted = surv.eps_etpa * pair_rate;
  const double eta = surv.eta_linear;
  RateTriple out;
  out.phi1 = det.dark_rate_1;
  out.phi2 = det.dark_rate_2;
  out.r1 = eta * ch.eps1 * ch.kappa1 * ch.beta1 * transmitted + out.phi1;
  out.r2 = eta * ch.eps2 * ch.kappa2 * ch.beta2 * transmitted + out.phi2;
  out.phi12 = det.window_seconds() * out.r1 * out.r2;
  out.r12 = eta * eta * ch.eps1 * ch.eps2 * ch.kappa1 * ch.kappa2 * ch.beta12 * transmitted + out.phi12;
  const double t = det.integration_time;
  out.err1 = std::sqrt(out.r1 / t);
  out.err2 = std::sqrt(out.r2 / t);
  out.err12 = std::sqrt(out.r12 / t);
  return out;
}

/// One point of an experimental sweep.
struct SweepPoint {
  Arm arm = Arm::sample;
  double delay_tau = 0.0;      ///< fs
  double pump_power = 0.0;     ///< mW
  double concentration = 0.0;  ///< mol/L

  bool is_solvent() const { return concentration == 0.0; }
};

/// Everything the detectors see at one sweep point, before noise.
struct PointModel {
  double pair_rate = 0.0;  ///< pairs/s at the cuvette (before ETPA)
  SurvivalFactors survival;
  ChannelParams channel;
  RateTriple rates;
};

/// Noise-free model of one sweep point. `channel` overrides the arm's channel
/// when supplied (used for coupling perturbations).
inline PointModel model_point(const ExperimentConfig& cfg, const SweepPoint& pt,
                              const ChannelParams* channel = nullptr) {
  SourceParams src = cfg.source;
  src.pump_power = pt.pump_power;
  src.delay_tau = pt.delay_tau;

  PointModel m;
  m.pair_rate = pair_rate_at_cuvette(src);
  if (!pt.is_solvent()) m.pair_rate *= cfg.knobs.sample_run_pump_scale;

  if (pt.arm == Arm::sample) {
    SampleParams sam = cfg.sample;
    sam.concentration = pt.concentration;
    sam.path_length_l = cfg.path_length();
    m.survival.eps_etpa = etpa_survival(sam, pt.delay_tau, src.correlation_time_Te);
    m.survival.eta_linear = linear_survival(sam);
    if (auto it = cfg.knobs.excess_transmission.find(pt.concentration); it != cfg.knobs.excess_transmission.end())
      m.survival.eta_linear *= it->second;
    m.channel = channel ? *channel : cfg.channel;
  } else {
    m.channel = channel ? *channel : cfg.reference_channel;
  }
  m.rates = detected_rates(m.pair_rate, m.survival, m.channel, cfg.detector);
  return m;
}

}  // namespace etpa
