// etpa: simulate, analyze and fit entangled two-photon absorption transmission experiments.
//
// Exit codes: 0 success, 1 validation, 2 I/O, 3 fit failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "etpa/etpa.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kFit = 3 };

void print_issues(const etpa::ValidationError& e) {
  std::cerr << "error: validation failed\n";
  for (const auto& issue : e.issues()) std::cerr << "  " << issue.field << ": " << issue.message << '\n';
}

void print_diagnostics(const etpa::IngestResult& r) {
  for (const auto& d : r.diagnostics) {
    std::cerr << (d.level == etpa::Diagnostic::Level::warning ? "warning" : "rejected");
    if (d.line) std::cerr << " line " << d.line;
    if (!d.column.empty()) std::cerr << " [" << d.column << "]";
    std::cerr << ": " << d.message << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ETPA transmission-experiment simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(etpa::kVersion));

  std::string config_path, out_dir = ".", counts_path, mode = "rate", shape = "auto", arm_name;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  double rate = 0.0, concentration = 0.0, length = 1.0;

  auto* sim = app.add_subcommand("simulate", "Generate synthetic counts for a configured sweep");
  sim->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--seed", seed, "Base seed (overrides the config)");
  sim->add_option("--mode", mode, "rate | event")->check(CLI::IsMember({"rate", "event"}));
  sim->add_option("--replicas", replicas, "Replicas per sweep point (overrides the config)");

  auto* ana = app.add_subcommand("analyze", "Cross-section table, signal series and bounds from a counts CSV");
  ana->add_option("--config", config_path, "Configuration supplying channel and detector parameters")->required();
  ana->add_option("--counts", counts_path, "Counts CSV")->required();
  ana->add_option("--out", out_dir, "Output directory");

  auto* ing = app.add_subcommand("ingest", "Validate and normalize an external counts CSV");
  ing->add_option("--counts", counts_path, "Counts CSV")->required();
  ing->add_option("--out", out_dir, "Output directory");

  auto* hom = app.add_subcommand("hom-fit", "Fit the interference model to a delay scan");
  hom->add_option("--counts", counts_path, "Counts CSV over delay")->required();
  hom->add_option("--out", out_dir, "Output directory");
  hom->add_option("--shape", shape, "dip | peak | auto")->check(CLI::IsMember({"dip", "peak", "auto"}));
  hom->add_option("--arm", arm_name, "Restrict to one arm")->check(CLI::IsMember({"sample", "reference"}));

  auto* bnd = app.add_subcommand("bound", "Sensitivity lower bound of the transmission scheme");
  bnd->add_option("--rate", rate, "Solvent count rate [1/s]")->required();
  bnd->add_option("--concentration", concentration, "Concentration [mol/L]")->required();
  bnd->add_option("--length", length, "Path length [cm]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*sim) {
      etpa::ExperimentConfig cfg = etpa::load_config(config_path);
      etpa::SimulationPlan plan{cfg, mode == "event" ? etpa::SimulationMode::event_level
                                                     : etpa::SimulationMode::rate_level,
                                replicas.value_or(cfg.sweep.replicas), seed.value_or(cfg.seed)};
      plan.config.sweep.replicas = plan.replicas;
      plan.config.seed = plan.base_seed;
      const auto out = etpa::run_simulation(plan, out_dir);
      std::cout << "wrote " << out.records.size() << " rows to "
                << (std::filesystem::path(out_dir) / "counts.csv").string() << '\n';
    } else if (*ana) {
      const etpa::ExperimentConfig cfg = etpa::load_config(config_path);
      etpa::validate_config(cfg);
      const auto ingested = etpa::ingest_counts_csv(counts_path);
      print_diagnostics(ingested);
      const auto result = etpa::analyze_records(ingested.records, cfg);
      etpa::write_analysis(result, out_dir);
      etpa::write_report_table_text(std::cout, result);
    } else if (*ing) {
      const auto ingested = etpa::ingest_counts_csv(counts_path);
      print_diagnostics(ingested);
      std::filesystem::create_directories(out_dir);
      etpa::write_counts_csv((std::filesystem::path(out_dir) / "counts.csv").string(), ingested.records);
      std::cout << "ingested " << ingested.records.size() << " records, rejected " << ingested.rejected_rows()
                << " rows\n";
    } else if (*hom) {
      const auto ingested = etpa::ingest_counts_csv(counts_path);
      print_diagnostics(ingested);
      std::optional<etpa::HomShape> s;
      if (shape == "dip") s = etpa::HomShape::dip;
      if (shape == "peak") s = etpa::HomShape::peak;
      std::optional<etpa::Arm> arm;
      if (!arm_name.empty()) arm = etpa::parse_arm(arm_name);
      const auto rep = etpa::fit_hom_scan(ingested.records, s, arm);
      etpa::write_hom_report(rep, out_dir);
      std::cout << etpa::hom_report_json(rep).dump(2) << '\n';
    } else if (*bnd) {
      std::printf("%.6g\n", etpa::sensitivity_bound(rate, concentration, length));
    }
  } catch (const etpa::ValidationError& e) {
    print_issues(e);
    return kValidation;
  } catch (const etpa::FitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!e.residuals().empty()) {
      std::cerr << "normalized residuals:";
      for (double r : e.residuals()) std::cerr << ' ' << r;
      std::cerr << '\n';
    }
    return kFit;
  } catch (const etpa::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const etpa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
