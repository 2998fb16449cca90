#pragma once

#include <cstdint>
#include <algorithm>
#include <optional>
#include <string>
#include <thread>
#include <string_view>
#include <vector>

#include "simcal/metrics.hpp"
#include "simcal/scenario.hpp"
#include "simcal/scene.hpp"

namespace simcal {

enum class PlanKind {
  quasi_static_cdf,
  dynamic_cdf,
  tracking_decay,
  phase_rmse_sweep,
  localization,
  sensing_demo,
  crlb_sweep,
  coherent_gain,
};

const char* plan_name(PlanKind kind);
/// Throws ConfigError("plan", ...) for unknown names.
PlanKind parse_plan(std::string_view name);
std::vector<std::string> plan_names();

struct RunPlan {
  PlanKind kind = PlanKind::quasi_static_cdf;
  int drops = 0;                       // 0: the config's run.drops
  std::optional<std::uint64_t> seed;   // overrides run.seed
  std::string output_dir = "out";
  unsigned workers = 0;                // 0: hardware concurrency
  std::vector<std::string> algorithms;  // series kept in the output; empty keeps all
  PrecoderKind precoder = PrecoderKind::zf;
  bool robust_tracking = false;
  std::vector<double> tx_powers_dbm{10.0, 15.0, 20.0, 25.0, 30.0, 35.0};
  std::vector<double> rho_db{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
  int crlb_trials = 1000;
};

/// Drop failures are isolated: the failing drop is recorded and the run continues.
struct FailedDrop {
  std::uint64_t drop = 0;
  std::string message;
};

/// 0 resolves to the hardware concurrency (at least 1).
unsigned resolve_workers(unsigned workers);

/// Runs fn(drop) for every drop. EstimationError and ValidationError mark that drop failed
/// (empty result, message recorded in drop order); any other exception aborts the run.
template <typename T, typename Fn>
std::vector<std::optional<T>> run_isolated(int drops, unsigned workers, Fn fn, std::vector<FailedDrop>& failed) {
  if (drops < 1) throw ValidationError("run: drops must be >= 1");
  std::vector<std::optional<T>> results(static_cast<std::size_t>(drops));
  std::vector<std::string> errors(static_cast<std::size_t>(drops));
  parallel_for(results.size(), resolve_workers(workers), [&](std::size_t i) {
    try {
      results[i] = fn(static_cast<std::uint64_t>(i));
    } catch (const EstimationError& e) {
      errors[i] = e.what();
    } catch (const ValidationError& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) failed.push_back({static_cast<std::uint64_t>(i), errors[i]});
  }
  return results;
}

// ---- aggregated experiments (no file output) ----

struct QuasiStaticSummary {
  std::vector<MetricSeries> se;         // per algorithm, x = drop
  std::vector<MetricSeries> rmse_deg;   // per algorithm, x = drop
  std::vector<FailedDrop> failed;
  const MetricSeries& se_of(const std::string& name) const;
  const MetricSeries& rmse_of(const std::string& name) const;
};

QuasiStaticSummary run_quasi_static(const ScenarioConfig& cfg, int drops, unsigned workers, PrecoderKind kind);

struct DynamicSummary {
  std::vector<std::string> names;
  std::vector<std::vector<double>> se_mean;     // [series][pattern - 1], averaged over drops
  std::vector<std::vector<double>> rmse_mean;   // [series][pattern - 1], RMS over drops
  std::vector<MetricSeries> se_per_drop;        // per series: SE averaged over patterns
  std::vector<TraceRow> trace;                  // first successful drop
  std::vector<FailedDrop> failed;
  std::size_t series(const std::string& name) const;
  /// (SE_s - SE_uncal) / (SE_genie - SE_uncal) per pattern.
  std::vector<double> retained(const std::string& name) const;
  /// RMS of the per-pattern RMSE over patterns [0, count) (all patterns when count <= 0).
  double rmse_over_patterns(const std::string& name, int count = 0) const;
};

DynamicSummary run_dynamic(const ScenarioConfig& cfg, int drops, unsigned workers, const DynamicOptions& options);

struct LocalizationSummary {
  MetricSeries calibrated{"calibrated", "sample"};
  MetricSeries uncalibrated{"uncalibrated", "sample"};
  int failures = 0;
  std::vector<FailedDrop> failed;
};

LocalizationSummary run_localization(const ScenarioConfig& cfg, int drops, unsigned workers, int anchors = 4);

struct CoherentGainSummary {
  std::vector<int> ports;
  std::vector<double> ideal_mean_db;
  std::vector<double> uncalibrated_mean_db;
  MetricSeries ideal_slope{"ideal", "drop"};        // dB per doubling
  MetricSeries uncalibrated_slope{"uncalibrated", "drop"};
  // SNR change of every single doubling, all drops pooled.
  MetricSeries ideal_increment{"ideal", "sample"};
  MetricSeries uncalibrated_increment{"uncalibrated", "sample"};
  double ideal_mean_slope_db = 0.0;         // LS slope of the drop-averaged curve
  double uncalibrated_mean_slope_db = 0.0;
  std::vector<FailedDrop> failed;
};

CoherentGainSummary run_coherent_gain(const ScenarioConfig& cfg, int drops, unsigned workers, PowerMode mode);

std::vector<CrlbPoint> run_crlb_sweep(const ScenarioConfig& cfg, const std::vector<double>& rho_db, int trials);

// ---- file output ----

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunReport {
  std::vector<Artifact> artifacts;
  std::vector<FailedDrop> failed;
  std::string manifest_path;
};

/// Runs the plan, writes its CSVs and manifest.json into output_dir. Outputs are
/// byte-identical for a fixed (config, plan, seed) whatever the worker count.
RunReport run_plan(const ScenarioConfig& cfg, const RunPlan& plan);

std::string sha256_hex(std::string_view data);

/// Written into every manifest; hashes depend on (plan, config, seed, version).
inline constexpr const char* kVersion = "0.1.0";

}  // namespace simcal
