#pragma once

// JSON experiment configuration. Every section is optional and falls back to
// the defaults of the corresponding struct; unknown keys are rejected.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "etpa/core.hpp"

namespace etpa {

using json = nlohmann::json;

namespace detail {

/// Reads the keys of one JSON object, collecting issues instead of throwing.
class SectionReader {
 public:
  SectionReader(const json& obj, std::string path, std::vector<ValidationIssue>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {
    if (!obj_.is_object()) issues_.push_back({path_, "must be an object"});
  }

  template <class T>
  void read(const std::string& key, T& target) {
    known_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
        target = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        target = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        target = v.get<T>();
      } else {
        target = v.get<T>();
      }
    } catch (const std::exception& e) {
      issues_.push_back({path_ + "." + key, e.what()});
    }
  }

  /// Reads a string-valued key through a parser returning std::optional.
  template <class T, class Parse>
  void read_enum(const std::string& key, T& target, Parse parse) {
    known_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) {
      issues_.push_back({path_ + "." + key, "expected a string"});
      return;
    }
    if (auto parsed = parse(v.get<std::string>()))
      target = *parsed;
    else
      issues_.push_back({path_ + "." + key, "unrecognized value '" + v.get<std::string>() + "'"});
  }

  const json* child(const std::string& key) {
    known_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void reject_unknown() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items())
      if (std::find(known_.begin(), known_.end(), key) == known_.end())
        issues_.push_back({path_.empty() ? key : path_ + "." + key, "unknown key"});
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<ValidationIssue>& issues_;
  std::vector<std::string> known_;
};

inline void read_channel(const json& j, const std::string& path, ChannelParams& c,
                         std::vector<ValidationIssue>& issues) {
  SectionReader r(j, path, issues);
  r.read("eps1", c.eps1);
  r.read("eps2", c.eps2);
  r.read("kappa1", c.kappa1);
  r.read("kappa2", c.kappa2);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("beta12", c.beta12);
  r.reject_unknown();
}

inline json channel_json(const ChannelParams& c) {
  return {{"eps1", c.eps1},     {"eps2", c.eps2},   {"kappa1", c.kappa1}, {"kappa2", c.kappa2},
          {"beta1", c.beta1}, {"beta2", c.beta2}, {"beta12", c.beta12}};
}

}  // namespace detail

/// Parses a configuration; structural and type problems are reported together.
/// The result is not yet checked against the physical invariants (see validate_config).
inline ExperimentConfig config_from_json(const json& root) {
  std::vector<ValidationIssue> issues;
  ExperimentConfig cfg;
  bool reference_channel_given = false;

  detail::SectionReader top(root, "", issues);
  if (const json* s = top.child("source")) {
    detail::SectionReader r(*s, "source", issues);
    r.read("pump_power", cfg.source.pump_power);
    r.read("pairs_per_mw", cfg.source.pairs_per_mw);
    r.read("hom_visibility", cfg.source.hom_visibility);
    r.read("correlation_time_Te", cfg.source.correlation_time_Te);
    r.read("delay_tau", cfg.source.delay_tau);
    r.read_enum("geometry", cfg.source.geometry, parse_geometry);
    r.reject_unknown();
  }
  if (const json* s = top.child("sample")) {
    detail::SectionReader r(*s, "sample", issues);
    r.read("concentration", cfg.sample.concentration);
    r.read("path_length_l", cfg.sample.path_length_l);
    r.read("sigma_e_true", cfg.sample.sigma_e_true);
    r.read("linear_attenuation_alpha", cfg.sample.linear_attenuation_alpha);
    r.read("is_solvent_only", cfg.sample.is_solvent_only);
    r.reject_unknown();
  }
  if (const json* s = top.child("channel")) detail::read_channel(*s, "channel", cfg.channel, issues);
  if (const json* s = top.child("reference_channel")) {
    detail::read_channel(*s, "reference_channel", cfg.reference_channel, issues);
    reference_channel_given = true;
  }
  if (const json* s = top.child("detector")) {
    detail::SectionReader r(*s, "detector", issues);
    r.read("dark_rate_1", cfg.detector.dark_rate_1);
    r.read("dark_rate_2", cfg.detector.dark_rate_2);
    r.read("coincidence_window_tau_c", cfg.detector.coincidence_window_tau_c);
    r.read("integration_time", cfg.detector.integration_time);
    r.reject_unknown();
  }
  if (const json* s = top.child("sweep")) {
    detail::SectionReader r(*s, "sweep", issues);
    r.read("pump_powers", cfg.sweep.pump_powers);
    r.read("concentrations", cfg.sweep.concentrations);
    r.read("delays", cfg.sweep.delays);
    r.read("replicas", cfg.sweep.replicas);
    if (const json* arms = r.child("arms")) {
      cfg.sweep.arms.clear();
      if (!arms->is_array()) {
        issues.push_back({"sweep.arms", "expected an array"});
      } else {
        for (const auto& a : *arms) {
          auto arm = a.is_string() ? parse_arm(a.get<std::string>()) : std::nullopt;
          if (arm)
            cfg.sweep.arms.push_back(*arm);
          else
            issues.push_back({"sweep.arms", "entries must be \"sample\" or \"reference\""});
        }
      }
    }
    r.reject_unknown();
  }
  if (const json* s = top.child("knobs")) {
    detail::SectionReader r(*s, "knobs", issues);
    r.read("coupling_jitter", cfg.knobs.coupling_jitter);
    r.read("sample_run_pump_scale", cfg.knobs.sample_run_pump_scale);
    double length = 0.0;
    bool has_length = s->is_object() && s->contains("effective_path_length");
    r.read("effective_path_length", length);
    if (has_length) cfg.knobs.effective_path_length = length;
    if (const json* t = r.child("excess_transmission")) {
      if (!t->is_array()) issues.push_back({"knobs.excess_transmission", "expected an array"});
      else
        for (std::size_t i = 0; i < t->size(); ++i) {
          const json& e = (*t)[i];
          const std::string path = "knobs.excess_transmission[" + std::to_string(i) + "]";
          double c = 0.0, tr = 1.0;
          detail::SectionReader er(e, path, issues);
          er.read("concentration", c);
          er.read("transmission", tr);
          er.reject_unknown();
          if (e.is_object() && (!e.contains("concentration") || !e.contains("transmission")))
            issues.push_back({path, "needs concentration and transmission"});
          else
            cfg.knobs.excess_transmission[c] = tr;
        }
    }
    r.reject_unknown();
  }
  if (const json* s = top.child("analysis")) {
    detail::SectionReader r(*s, "analysis", issues);
    r.read_enum("accidentals", cfg.analysis.accidentals, [](const std::string& v) -> std::optional<AccidentalsMode> {
      if (v == "computed") return AccidentalsMode::computed;
      if (v == "measured") return AccidentalsMode::measured;
      return std::nullopt;
    });
    r.read("measured_accidentals_rate", cfg.analysis.measured_accidentals_rate);
    r.read("reference_correction", cfg.analysis.reference_correction);
    r.reject_unknown();
  }
  top.read("seed", cfg.seed);
  top.reject_unknown();

  if (!reference_channel_given) cfg.reference_channel = cfg.channel;
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json arms = json::array();
  for (Arm a : cfg.sweep.arms) arms.push_back(std::string(to_string(a)));
  json knobs = {{"coupling_jitter", cfg.knobs.coupling_jitter},
                {"sample_run_pump_scale", cfg.knobs.sample_run_pump_scale}};
  if (cfg.knobs.effective_path_length) knobs["effective_path_length"] = *cfg.knobs.effective_path_length;
  if (!cfg.knobs.excess_transmission.empty()) {
    json t = json::array();
    for (const auto& [c, tr] : cfg.knobs.excess_transmission) t.push_back({{"concentration", c}, {"transmission", tr}});
    knobs["excess_transmission"] = t;
  }
  return {
      {"source",
       {{"pump_power", cfg.source.pump_power},
        {"pairs_per_mw", cfg.source.pairs_per_mw},
        {"hom_visibility", cfg.source.hom_visibility},
        {"correlation_time_Te", cfg.source.correlation_time_Te},
        {"delay_tau", cfg.source.delay_tau},
        {"geometry", std::string(to_string(cfg.source.geometry))}}},
      {"sample",
       {{"concentration", cfg.sample.concentration},
        {"path_length_l", cfg.sample.path_length_l},
        {"sigma_e_true", cfg.sample.sigma_e_true},
        {"linear_attenuation_alpha", cfg.sample.linear_attenuation_alpha},
        {"is_solvent_only", cfg.sample.is_solvent_only}}},
      {"channel", detail::channel_json(cfg.channel)},
      {"reference_channel", detail::channel_json(cfg.reference_channel)},
      {"detector",
       {{"dark_rate_1", cfg.detector.dark_rate_1},
        {"dark_rate_2", cfg.detector.dark_rate_2},
        {"coincidence_window_tau_c", cfg.detector.coincidence_window_tau_c},
        {"integration_time", cfg.detector.integration_time}}},
      {"sweep",
       {{"pump_powers", cfg.sweep.pump_powers},
        {"concentrations", cfg.sweep.concentrations},
        {"delays", cfg.sweep.delays},
        {"arms", arms},
        {"replicas", cfg.sweep.replicas}}},
      {"knobs", knobs},
      {"analysis",
       {{"accidentals", cfg.analysis.accidentals == AccidentalsMode::computed ? "computed" : "measured"},
        {"measured_accidentals_rate", cfg.analysis.measured_accidentals_rate},
        {"reference_correction", cfg.analysis.reference_correction}}},
      {"seed", cfg.seed},
  };
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("JSON parse error: ") + e.what());
  }
  return config_from_json(root);
}

/// 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical (sorted-key, compact) serialization of a configuration.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(config_to_json(cfg).dump()); }

}  // namespace etpa
