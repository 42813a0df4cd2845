#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "etpa/core.hpp"

using namespace etpa;

namespace {

bool has_issue(const ExperimentConfig& cfg, const std::string& field) {
  for (const auto& i : config_issues(cfg))
    if (i.field == field) return true;
  return false;
}

}  // namespace

TEST(MoleculesPerArea, ZeroConcentration) { EXPECT_EQ(molecules_per_area(0.0, 1.0), 0.0); }

TEST(MoleculesPerArea, HandEvaluatedValues) {
  // 5.8e-5 mol/cm^3 * N_A * 1 cm
  EXPECT_NEAR(molecules_per_area(0.058, 1.0), 3.4928416408e19, 1e7);
  // 1e-8 mol/cm^3 * N_A * 1 cm
  EXPECT_NEAR(molecules_per_area(10e-6, 1.0), 6.02214076e15, 1e3);
}

TEST(MoleculesPerArea, LinearInBothArguments) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> c(0.0, 0.1), l(0.01, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double ci = c(rng), li = l(rng);
    EXPECT_EQ(molecules_per_area(2.0 * ci, li), 2.0 * molecules_per_area(ci, li));
    EXPECT_DOUBLE_EQ(molecules_per_area(ci, 3.0 * li), 3.0 * molecules_per_area(ci, li));
  }
}

TEST(MoleculesPerArea, RejectsNegativeInputs) {
  EXPECT_THROW(molecules_per_area(-1e-3, 1.0), ValidationError);
  EXPECT_THROW(molecules_per_area(1e-3, 0.0), ValidationError);
  EXPECT_THROW(molecules_per_area(1e-3, -1.0), ValidationError);
}

TEST(ValidateConfig, DefaultIsValid) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.channel.beta1, 0.75);
  EXPECT_EQ(cfg.channel.beta2, 0.75);
  EXPECT_EQ(cfg.channel.beta12, 0.5);
  EXPECT_TRUE(config_issues(cfg).empty());
  EXPECT_NO_THROW(validate_config(cfg));
}

TEST(ValidateConfig, VisibilityOutOfRange) {
  ExperimentConfig cfg;
  cfg.source.hom_visibility = 1.2;
  EXPECT_TRUE(has_issue(cfg, "source.hom_visibility"));
  EXPECT_THROW(validate_config(cfg), ValidationError);
}

TEST(ValidateConfig, PairSurvivalBelowZero) {
  ExperimentConfig cfg;
  cfg.sample.concentration = 0.058;
  cfg.sample.sigma_e_true = 1.5 / molecules_per_area(0.058, 1.0);
  const auto issues = config_issues(cfg);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].field, "sample.sigma_e_true");
  EXPECT_NE(issues[0].message.find("pair survival < 0"), std::string::npos);
}

TEST(ValidateConfig, PairSurvivalUsesSweepConcentrations) {
  ExperimentConfig cfg;
  cfg.sample.sigma_e_true = 8.36e-18;
  cfg.sweep.concentrations = {5e-6};
  EXPECT_TRUE(config_issues(cfg).empty());
  cfg.sweep.concentrations = {5e-6, 1400e-6};  // depletion ~7
  EXPECT_TRUE(has_issue(cfg, "sample.sigma_e_true"));
}

TEST(ValidateConfig, CollinearForbidsDelay) {
  ExperimentConfig cfg;
  cfg.source.geometry = Geometry::collinear;
  cfg.source.delay_tau = 100.0;
  cfg.sweep.delays = {0.0, 333.0};
  EXPECT_TRUE(has_issue(cfg, "source.delay_tau"));
  EXPECT_TRUE(has_issue(cfg, "sweep.delays[1]"));
}

TEST(ValidateConfig, ErrorsAreAggregated) {
  ExperimentConfig cfg;
  cfg.source.hom_visibility = -0.1;
  cfg.channel.eps1 = 1.5;
  cfg.detector.integration_time = 0.0;
  cfg.sweep.pump_powers.clear();
  try {
    validate_config(cfg);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_GE(e.issues().size(), 4u);
  }
}

// Every single-field mutation outside its range is rejected.
TEST(ValidateConfig, RejectsEachSingleFieldMutation) {
  using Mutation = std::pair<std::string, std::function<void(ExperimentConfig&)>>;
  const std::vector<Mutation> mutations = {
      {"source.pump_power", [](auto& c) { c.source.pump_power = -1; }},
      {"source.pairs_per_mw", [](auto& c) { c.source.pairs_per_mw = -1; }},
      {"source.hom_visibility", [](auto& c) { c.source.hom_visibility = 1.01; }},
      {"source.correlation_time_Te", [](auto& c) { c.source.correlation_time_Te = 0; }},
      {"sample.concentration", [](auto& c) { c.sample.concentration = -1e-3; }},
      {"sample.path_length_l", [](auto& c) { c.sample.path_length_l = 0; }},
      {"sample.sigma_e_true", [](auto& c) { c.sample.sigma_e_true = -1e-20; }},
      {"sample.linear_attenuation_alpha", [](auto& c) { c.sample.linear_attenuation_alpha = -1; }},
      {"channel.eps1", [](auto& c) { c.channel.eps1 = 1.1; }},
      {"channel.eps2", [](auto& c) { c.channel.eps2 = -0.1; }},
      {"channel.kappa1", [](auto& c) { c.channel.kappa1 = 2; }},
      {"channel.kappa2", [](auto& c) { c.channel.kappa2 = -1; }},
      {"channel.beta1", [](auto& c) { c.channel.beta1 = 1.5; }},
      {"channel.beta2", [](auto& c) { c.channel.beta2 = -0.5; }},
      {"channel.beta12", [](auto& c) { c.channel.beta12 = 1.2; }},
      {"reference_channel.eps1", [](auto& c) { c.reference_channel.eps1 = 1.1; }},
      {"detector.dark_rate_1", [](auto& c) { c.detector.dark_rate_1 = -1; }},
      {"detector.dark_rate_2", [](auto& c) { c.detector.dark_rate_2 = -1; }},
      {"detector.coincidence_window_tau_c", [](auto& c) { c.detector.coincidence_window_tau_c = 0; }},
      {"detector.integration_time", [](auto& c) { c.detector.integration_time = 0; }},
      {"sweep.replicas", [](auto& c) { c.sweep.replicas = 0; }},
      {"sweep.arms", [](auto& c) { c.sweep.arms.clear(); }},
      {"sweep.delays", [](auto& c) { c.sweep.delays.clear(); }},
      {"sweep.concentrations", [](auto& c) { c.sweep.concentrations.clear(); }},
  };
  for (const auto& [field, mutate] : mutations) {
    ExperimentConfig cfg;
    mutate(cfg);
    EXPECT_TRUE(has_issue(cfg, field)) << field;
  }
}

TEST(SampleParams, SolventOnlyZeroesConcentration) {
  SampleParams s;
  s.concentration = 0.01;
  s.is_solvent_only = true;
  EXPECT_EQ(s.effective_concentration(), 0.0);
}

TEST(CrossSectionEstimate, ConsistentWithZeroFlag) {
  EXPECT_TRUE((CrossSectionEstimate{-1e-20, 2e-20}).consistent_with_zero());
  EXPECT_FALSE((CrossSectionEstimate{3e-20, 1e-20}).consistent_with_zero());
}
