// simcal: run calibration / sensing experiments and write CSV artifacts.
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "simcal/csv.hpp"
#include "simcal/runner.hpp"
#include "simcal/scenario.hpp"
#include "simcal/scene.hpp"
#include "simcal/sensing.hpp"

namespace {

// Exit codes: 0 ok, 1 usage, 2 config, 3 too many failed drops, 4 runtime error.
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDrops = 3;
constexpr int kExitRuntime = 4;

simcal::ScenarioConfig load(const std::string& path) {
  return path.empty() ? simcal::table1_scenario() : simcal::load_scenario_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reciprocity calibration and sensing simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string plan_name;
  int drops = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> algorithms;
  bool noiseless = false;
  unsigned workers = 0;
  std::string precoder = "zf";
  bool robust = false;
  int trials = 1000;

  CLI::App* run = app.add_subcommand("run", "Run an experiment plan");
  run->add_option("--config", config_path, "Scenario JSON (default: built-in deployment)");
  run->add_option("--plan", plan_name, "Plan name")->required()->check(CLI::IsMember(simcal::plan_names()));
  run->add_option("--drops", drops, "Monte Carlo drops (default: run.drops)")->check(CLI::PositiveNumber);
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Seed override");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--algo", algorithms, "Series to keep, comma separated")->delimiter(',');
  run->add_flag("--noiseless", noiseless, "Disable receiver noise");
  run->add_option("--workers", workers, "Worker threads (default: all cores)");
  run->add_option("--precoder", precoder, "zf or mrt")->check(CLI::IsMember({"zf", "mrt"}));
  run->add_flag("--robust-tracking", robust, "Median phase aggregation in tracking");
  run->add_option("--trials", trials, "Trials per SNR point (crlb_sweep)")->check(CLI::PositiveNumber);

  CLI::App* val = app.add_subcommand("validate", "Validate a scenario file and print the resolved config");
  val->add_option("--config", config_path, "Scenario JSON")->required();

  std::vector<double> rho_db;
  CLI::App* cr = app.add_subcommand("crlb", "Print Cramer-Rao bounds for a list of SNRs");
  cr->add_option("--rho-db", rho_db, "SNR list in dB, comma separated")->required()->delimiter(',');
  cr->add_option("--config", config_path, "Scenario JSON (default: built-in deployment)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    simcal::ScenarioConfig cfg = load(config_path);
    if (*val) {
      std::cout << simcal::dump_scenario(cfg) << "\n";
      return 0;
    }
    if (*cr) {
      const int kc = cfg.num_subcarriers / cfg.num_calib_ue;
      const double comb_df = cfg.subcarrier_spacing_hz * cfg.num_trp * cfg.num_calib_ue;
      const double srs_df = cfg.subcarrier_spacing_hz * cfg.num_ue;
      simcal::CsvWriter csv(std::cout, {"rho_db", "range_std_m", "velocity_std_mps", "phase_var_rad2",
                                        "round_trip_delay_std_s"});
      for (double r : rho_db) {
        const double rho = simcal::db_to_linear(r);
        const simcal::CrlbReport b = simcal::crlb(rho, cfg.num_subcarriers, cfg.num_symbols, srs_df,
                                                  cfg.symbol_interval_s, cfg.carrier_freq_hz);
        csv.row(r, std::sqrt(b.d_crlb_m2), std::sqrt(b.v_crlb), b.theta_total,
                std::sqrt(simcal::round_trip_delay_crlb_s2(rho, kc, comb_df)));
      }
      return 0;
    }

    if (noiseless) cfg.noiseless = true;
    simcal::RunPlan plan;
    plan.kind = simcal::parse_plan(plan_name);
    plan.drops = drops;
    if (*seed_opt) plan.seed = seed;
    plan.output_dir = out_dir;
    plan.workers = workers;
    plan.algorithms = algorithms;
    plan.precoder = precoder == "mrt" ? simcal::PrecoderKind::mrt : simcal::PrecoderKind::zf;
    plan.robust_tracking = robust;
    plan.crlb_trials = trials;
    const simcal::RunReport report = simcal::run_plan(cfg, plan);
    const int total = plan.drops > 0 ? plan.drops : cfg.drops;
    std::cerr << "wrote " << report.artifacts.size() << " files and " << report.manifest_path << "\n";
    for (const simcal::FailedDrop& f : report.failed) {
      std::cerr << "drop " << f.drop << " failed: " << f.message << "\n";
    }
    if (static_cast<double>(report.failed.size()) > 0.01 * total) return kExitDrops;
    return 0;
  } catch (const simcal::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitConfig;
  } catch (const simcal::ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
