#pragma once

// Domain types, unit conventions and validation shared by the whole toolkit.
//
// Unit conventions at the API boundary:
//   pump power      milliwatts
//   concentration   mol/L (molar); converted to mol/cm^3 only inside molecules_per_area
//   path length     centimeters
//   cross-section   cm^2 per molecule
//   delay           femtoseconds
//   correlation     picoseconds (T_e)
//   coincidence     nanoseconds (tau_c)
//   integration     seconds
//   rates           counts per second

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etpa {

/// Avogadro constant, CODATA exact value [1/mol].
inline constexpr double kAvogadro = 6.02214076e23;

inline constexpr double kFemtosecondsPerPicosecond = 1.0e3;
inline constexpr double kSecondsPerNanosecond = 1.0e-9;
inline constexpr double kLitersPerCubicCentimeter = 1.0e-3;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationIssue {
  std::string field;    ///< dotted path, e.g. "source.hom_visibility"
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(summarize(issues)), issues_(std::move(issues)) {}
  ValidationError(std::string field, std::string message)
      : ValidationError(std::vector<ValidationIssue>{{std::move(field), std::move(message)}}) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& issue : issues) out += "\n  " + issue.field + ": " + issue.message;
    return out;
  }
  std::vector<ValidationIssue> issues_;
};

/// A model quantity left its physical range (e.g. a survival probability < 0).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A dark- or accidental-corrected rate is not strictly positive.
class DegenerateRateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Enumerations

enum class Geometry { collinear, noncollinear };
enum class Arm { sample, reference };
enum class EstimateMethod { standard_singles, standard_coincidence, g2, slope_ratio };

inline std::string_view to_string(Geometry g) {
  return g == Geometry::collinear ? "collinear" : "noncollinear";
}
inline std::string_view to_string(Arm a) { return a == Arm::sample ? "sample" : "reference"; }
inline std::string_view to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::standard_singles: return "standard_singles";
    case EstimateMethod::standard_coincidence: return "standard_coincidence";
    case EstimateMethod::g2: return "g2";
    case EstimateMethod::slope_ratio: return "slope_ratio";
  }
  return "unknown";
}

inline std::optional<Geometry> parse_geometry(std::string_view s) {
  if (s == "collinear") return Geometry::collinear;
  if (s == "noncollinear") return Geometry::noncollinear;
  return std::nullopt;
}
inline std::optional<Arm> parse_arm(std::string_view s) {
  if (s == "sample") return Arm::sample;
  if (s == "reference") return Arm::reference;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Value types

/// A value with its one-sigma uncertainty.
struct Measurement {
  double value = 0.0;
  double error = 0.0;

  double relative_error() const { return value != 0.0 ? std::abs(error / value) : 0.0; }
};

struct SourceParams {
  double pump_power = 1.0;             ///< mW
  double pairs_per_mw = 1.0e5;         ///< generated pairs/s per mW
  double hom_visibility = 0.957;
  double correlation_time_Te = 0.20;   ///< ps (FWHM of the HOM dip)
  double delay_tau = 0.0;              ///< fs
  Geometry geometry = Geometry::noncollinear;
};

struct SampleParams {
  double concentration = 0.0;              ///< mol/L
  double path_length_l = 1.0;              ///< cm
  double sigma_e_true = 0.0;               ///< cm^2/molecule
  double linear_attenuation_alpha = 0.0;   ///< absorbance per (mol/L * cm)
  bool is_solvent_only = false;

  /// Concentration that enters concentration-dependent terms.
  double effective_concentration() const { return is_solvent_only ? 0.0 : concentration; }
};

struct ChannelParams {
  double eps1 = 1.0;
  double eps2 = 1.0;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double beta1 = 0.75;
  double beta2 = 0.75;
  double beta12 = 0.5;
};

struct DetectorParams {
  double dark_rate_1 = 0.0;               ///< counts/s
  double dark_rate_2 = 0.0;               ///< counts/s
  double coincidence_window_tau_c = 1.05; ///< ns
  double integration_time = 60.0;         ///< s

  double window_seconds() const { return coincidence_window_tau_c * kSecondsPerNanosecond; }
};

/// Measured (or predicted) singles and coincidence rates with their baselines.
struct RateTriple {
  double r1 = 0.0, r2 = 0.0, r12 = 0.0;        ///< counts/s
  double phi1 = 0.0, phi2 = 0.0, phi12 = 0.0;  ///< dark / accidental baselines, counts/s
  double err1 = 0.0, err2 = 0.0, err12 = 0.0;  ///< one-sigma Poisson errors of r
  double phi_err1 = 0.0, phi_err2 = 0.0, phi_err12 = 0.0;  ///< baseline uncertainties
};

struct CountRecord {
  std::uint64_t run_id = 0;
  Arm arm = Arm::sample;
  double delay_tau = 0.0;         ///< fs
  double pump_power = 0.0;        ///< mW
  double concentration = 0.0;     ///< mol/L
  double integration_time = 1.0;  ///< s
  std::uint64_t singles1 = 0;
  std::uint64_t singles2 = 0;
  std::uint64_t coincidences = 0;
  std::uint64_t dark1 = 0;
  std::uint64_t dark2 = 0;
  std::uint64_t seed = 0;

  bool operator==(const CountRecord&) const = default;
};

struct CrossSectionEstimate {
  double value = 0.0;      ///< cm^2/molecule; negative values are kept
  double abs_error = 0.0;  ///< cm^2/molecule
  EstimateMethod method = EstimateMethod::g2;
  double concentration = 0.0;  ///< mol/L

  bool consistent_with_zero() const { return std::abs(value) < abs_error; }
};

// ---------------------------------------------------------------------------
// Experiment configuration

enum class AccidentalsMode { computed, measured };

struct SweepSpec {
  std::vector<double> pump_powers{1.0};      ///< mW
  std::vector<double> concentrations{0.0};   ///< mol/L; solvent (0) is added when absent
  std::vector<double> delays{0.0};           ///< fs
  std::vector<Arm> arms{Arm::sample};
  int replicas = 1;
};

/// Knobs that are not physical model parameters.
struct SimulationKnobs {
  /// Standard deviation of a multiplicative perturbation of kappa1/kappa2
  /// drawn for every non-solvent record (cuvette disturbance). 0 disables.
  double coupling_jitter = 0.0;
  /// Pair-rate scale applied to every non-solvent record, in both arms
  /// (pump drift between solvent and sample runs). 1 disables.
  double sample_run_pump_scale = 1.0;
  /// Overrides sample.path_length_l in concentration-dependent terms.
  std::optional<double> effective_path_length;
  /// Extra one-photon transmission per sample concentration [mol/L -> (0, 1]],
  /// multiplied onto the Beer-Lambert factor (aggregation, scattering).
  std::map<double, double> excess_transmission;
};

struct AnalysisOptions {
  AccidentalsMode accidentals = AccidentalsMode::computed;
  double measured_accidentals_rate = 0.0;  ///< counts/s, used when accidentals == measured
  bool reference_correction = true;        ///< only applied when reference rows exist
};

struct ExperimentConfig {
  SourceParams source;
  SampleParams sample;
  ChannelParams channel;
  ChannelParams reference_channel;
  DetectorParams detector;
  SweepSpec sweep;
  SimulationKnobs knobs;
  AnalysisOptions analysis;
  std::uint64_t seed = 1;

  double path_length() const { return knobs.effective_path_length.value_or(sample.path_length_l); }
};

// ---------------------------------------------------------------------------
// Operations

/// Number of molecules per unit beam area, c_vol * N_A * l [1/cm^2].
inline double molecules_per_area(double concentration_molar, double path_length_cm) {
  if (!(concentration_molar >= 0.0)) throw ValidationError("concentration", "must be >= 0");
  if (!(path_length_cm > 0.0)) throw ValidationError("path_length", "must be > 0");
  return concentration_molar * kLitersPerCubicCentimeter * kAvogadro * path_length_cm;
}

namespace detail {

inline void check_unit_interval(std::vector<ValidationIssue>& out, const std::string& field, double v) {
  if (!(v >= 0.0 && v <= 1.0)) out.push_back({field, "must lie in [0, 1]"});
}
inline void check_nonnegative(std::vector<ValidationIssue>& out, const std::string& field, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) out.push_back({field, "must be >= 0"});
}
inline void check_positive(std::vector<ValidationIssue>& out, const std::string& field, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) out.push_back({field, "must be > 0"});
}

inline void check_channel(std::vector<ValidationIssue>& out, const std::string& prefix, const ChannelParams& c) {
  check_unit_interval(out, prefix + ".eps1", c.eps1);
  check_unit_interval(out, prefix + ".eps2", c.eps2);
  check_unit_interval(out, prefix + ".kappa1", c.kappa1);
  check_unit_interval(out, prefix + ".kappa2", c.kappa2);
  check_unit_interval(out, prefix + ".beta1", c.beta1);
  check_unit_interval(out, prefix + ".beta2", c.beta2);
  check_unit_interval(out, prefix + ".beta12", c.beta12);
  // Routing probabilities: split = beta12, both-to-i = beta_i - beta12.
  if (c.beta1 < c.beta12 || c.beta2 < c.beta12)
    out.push_back({prefix + ".beta12", "must not exceed beta1 or beta2"});
  if (c.beta1 + c.beta2 - c.beta12 > 1.0 + 1e-12)
    out.push_back({prefix + ".beta1", "beta1 + beta2 - beta12 must be <= 1"});
}

}  // namespace detail

/// Checks every invariant of the configuration; issues are collected, not short-circuited.
inline std::vector<ValidationIssue> config_issues(const ExperimentConfig& cfg) {
  using namespace detail;
  std::vector<ValidationIssue> out;

  const auto& s = cfg.source;
  check_nonnegative(out, "source.pump_power", s.pump_power);
  check_nonnegative(out, "source.pairs_per_mw", s.pairs_per_mw);
  check_unit_interval(out, "source.hom_visibility", s.hom_visibility);
  check_positive(out, "source.correlation_time_Te", s.correlation_time_Te);
  if (!std::isfinite(s.delay_tau)) out.push_back({"source.delay_tau", "must be finite"});
  if (s.geometry == Geometry::collinear && s.delay_tau != 0.0)
    out.push_back({"source.delay_tau", "collinear geometry has no delay stage; delay must be 0"});

  const auto& m = cfg.sample;
  check_nonnegative(out, "sample.concentration", m.concentration);
  check_positive(out, "sample.path_length_l", m.path_length_l);
  check_nonnegative(out, "sample.sigma_e_true", m.sigma_e_true);
  check_nonnegative(out, "sample.linear_attenuation_alpha", m.linear_attenuation_alpha);
  if (cfg.knobs.effective_path_length)
    check_positive(out, "knobs.effective_path_length", *cfg.knobs.effective_path_length);

  check_channel(out, "channel", cfg.channel);
  check_channel(out, "reference_channel", cfg.reference_channel);

  const auto& d = cfg.detector;
  check_nonnegative(out, "detector.dark_rate_1", d.dark_rate_1);
  check_nonnegative(out, "detector.dark_rate_2", d.dark_rate_2);
  check_positive(out, "detector.coincidence_window_tau_c", d.coincidence_window_tau_c);
  check_positive(out, "detector.integration_time", d.integration_time);

  const auto& w = cfg.sweep;
  if (w.pump_powers.empty()) out.push_back({"sweep.pump_powers", "must not be empty"});
  if (w.concentrations.empty()) out.push_back({"sweep.concentrations", "must not be empty"});
  if (w.delays.empty()) out.push_back({"sweep.delays", "must not be empty"});
  if (w.arms.empty()) out.push_back({"sweep.arms", "must not be empty"});
  if (w.replicas < 1) out.push_back({"sweep.replicas", "must be >= 1"});
  for (std::size_t i = 0; i < w.pump_powers.size(); ++i)
    check_nonnegative(out, "sweep.pump_powers[" + std::to_string(i) + "]", w.pump_powers[i]);
  for (std::size_t i = 0; i < w.concentrations.size(); ++i)
    check_nonnegative(out, "sweep.concentrations[" + std::to_string(i) + "]", w.concentrations[i]);
  for (std::size_t i = 0; i < w.delays.size(); ++i) {
    if (!std::isfinite(w.delays[i]))
      out.push_back({"sweep.delays[" + std::to_string(i) + "]", "must be finite"});
    else if (s.geometry == Geometry::collinear && w.delays[i] != 0.0)
      out.push_back({"sweep.delays[" + std::to_string(i) + "]",
                     "collinear geometry has no delay stage; delay must be 0"});
  }

  check_nonnegative(out, "knobs.coupling_jitter", cfg.knobs.coupling_jitter);
  check_positive(out, "knobs.sample_run_pump_scale", cfg.knobs.sample_run_pump_scale);
  for (const auto& [c, t] : cfg.knobs.excess_transmission) {
    const std::string field = "knobs.excess_transmission[" + std::to_string(c) + "]";
    if (!(c > 0.0)) out.push_back({field, "concentration must be > 0"});
    if (!(t > 0.0 && t <= 1.0)) out.push_back({field, "transmission must be in (0, 1]"});
  }
  check_nonnegative(out, "analysis.measured_accidentals_rate", cfg.analysis.measured_accidentals_rate);

  // Pair survival 1 - sigma * c * l * N_A must stay in [0, 1] for every concentration used.
  const double length = cfg.path_length();
  if (m.sigma_e_true >= 0.0 && length > 0.0) {
    double c_max = m.effective_concentration() >= 0.0 ? m.effective_concentration() : 0.0;
    if (!m.is_solvent_only)
      for (double c : w.concentrations)
        if (c > c_max) c_max = c;
    const double depletion = m.sigma_e_true * c_max * kLitersPerCubicCentimeter * kAvogadro * length;
    if (depletion > 1.0 + 1e-12) out.push_back({"sample.sigma_e_true", "pair survival < 0 (sigma_E * c * l * N_A > 1)"});
  }
  return out;
}

/// Returns the configuration unchanged, or throws ValidationError listing every issue.
inline const ExperimentConfig& validate_config(const ExperimentConfig& cfg) {
  auto issues = config_issues(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

}  // namespace etpa
