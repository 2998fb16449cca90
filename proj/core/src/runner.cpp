#include "simcal/runner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "simcal/csv.hpp"

namespace simcal {

namespace {

constexpr std::array<std::pair<PlanKind, const char*>, 8> kPlans{{
    {PlanKind::quasi_static_cdf, "quasi_static_cdf"},
    {PlanKind::dynamic_cdf, "dynamic_cdf"},
    {PlanKind::tracking_decay, "tracking_decay"},
    {PlanKind::phase_rmse_sweep, "phase_rmse_sweep"},
    {PlanKind::localization, "localization"},
    {PlanKind::sensing_demo, "sensing_demo"},
    {PlanKind::crlb_sweep, "crlb_sweep"},
    {PlanKind::coherent_gain, "coherent_gain"},
}};

const MetricSeries& find_series(const std::vector<MetricSeries>& list, const std::string& name) {
  for (const MetricSeries& s : list) {
    if (s.name() == name) return s;
  }
  throw ValidationError("no series named '" + name + "'");
}

class OutputDir {
 public:
  explicit OutputDir(std::string root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(std::filesystem::path(root_) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (std::filesystem::path(root_) / name).string());
    out << content;
    artifacts_.push_back({name, sha256_hex(content), content.size()});
  }

  template <typename Fn>
  void emit(const std::string& name, Fn fn) {
    std::ostringstream os;
    fn(os);
    write(name, os.str());
  }

  void series(const std::string& name, const MetricSeries& s) {
    emit(name, [&](std::ostream& os) { s.write_csv(os); });
  }

  void series_with_cdf(const std::string& stem, const MetricSeries& s) {
    series(stem + "_" + s.name() + ".csv", s);
    emit("cdf_" + stem + "_" + s.name() + ".csv", [&](std::ostream& os) { write_cdf_csv(cdf(s.values()), os); });
  }

  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  const std::string& root() const { return root_; }

 private:
  std::string root_;
  std::vector<Artifact> artifacts_;
};

MetricSeries pattern_series(const std::string& name, const std::vector<double>& values) {
  MetricSeries s(name, "pattern");
  for (std::size_t p = 0; p < values.size(); ++p) s.add(static_cast<double>(p + 1), values[p]);
  return s;
}

void write_stft_csv(const std::vector<StftFrame>& frames, std::ostream& out) {
  CsvWriter csv(out, {"time_s", "freq_hz", "magnitude"});
  for (const StftFrame& f : frames) csv.row(f.time_s, f.freq_hz, f.magnitude);
}

}  // namespace

const char* plan_name(PlanKind kind) {
  for (const auto& [k, name] : kPlans) {
    if (k == kind) return name;
  }
  return "unknown";
}

PlanKind parse_plan(std::string_view name) {
  for (const auto& [k, n] : kPlans) {
    if (name == n) return k;
  }
  throw ConfigError("plan", "unknown plan '" + std::string(name) + "'");
}

std::vector<std::string> plan_names() {
  std::vector<std::string> out;
  for (const auto& entry : kPlans) out.emplace_back(entry.second);
  return out;
}

const MetricSeries& QuasiStaticSummary::se_of(const std::string& name) const { return find_series(se, name); }
const MetricSeries& QuasiStaticSummary::rmse_of(const std::string& name) const { return find_series(rmse_deg, name); }

QuasiStaticSummary run_quasi_static(const ScenarioConfig& cfg, int drops, unsigned workers, PrecoderKind kind) {
  QuasiStaticSummary out;
  const auto results = run_isolated<QuasiStaticDrop>(
      drops, workers, [&](std::uint64_t d) { return run_quasi_static_drop(cfg, d, kind); }, out.failed);
  for (std::size_t d = 0; d < results.size(); ++d) {
    if (!results[d]) continue;
    const QuasiStaticDrop& r = *results[d];
    if (out.se.empty()) {
      for (const std::string& n : r.se.names) out.se.emplace_back(n, "drop");
      for (const std::string& n : r.phase_rmse_deg.names) out.rmse_deg.emplace_back(n, "drop");
    }
    for (std::size_t i = 0; i < r.se.values.size(); ++i) out.se[i].add(static_cast<double>(d), r.se.values[i]);
    for (std::size_t i = 0; i < r.phase_rmse_deg.values.size(); ++i) {
      out.rmse_deg[i].add(static_cast<double>(d), r.phase_rmse_deg.values[i]);
    }
  }
  if (out.se.empty()) throw EstimationError("quasi-static run: every drop failed");
  return out;
}

std::size_t DynamicSummary::series(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw ValidationError("no dynamic series named '" + name + "'");
}

std::vector<double> DynamicSummary::retained(const std::string& name) const {
  const auto& s = se_mean[series(name)];
  const auto& lo = se_mean[series("uncalibrated")];
  const auto& hi = se_mean[series("genie")];
  std::vector<double> out(s.size());
  for (std::size_t p = 0; p < s.size(); ++p) {
    const double gap = hi[p] - lo[p];
    out[p] = gap > 0.0 ? (s[p] - lo[p]) / gap : 0.0;
  }
  return out;
}

double DynamicSummary::rmse_over_patterns(const std::string& name, int count) const {
  const auto& r = rmse_mean[series(name)];
  const std::size_t n = count <= 0 ? r.size() : std::min<std::size_t>(r.size(), static_cast<std::size_t>(count));
  double ss = 0.0;
  for (std::size_t p = 0; p < n; ++p) ss += r[p] * r[p];
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

DynamicSummary run_dynamic(const ScenarioConfig& cfg, int drops, unsigned workers, const DynamicOptions& options) {
  DynamicSummary out;
  const auto results = run_isolated<DynamicDrop>(
      drops, workers, [&](std::uint64_t d) { return run_dynamic_drop(cfg, d, options); }, out.failed);
  std::size_t ok = 0;
  for (std::size_t d = 0; d < results.size(); ++d) {
    if (!results[d]) continue;
    const DynamicDrop& r = *results[d];
    if (ok == 0) {
      out.names = r.names;
      out.se_mean.assign(r.names.size(), std::vector<double>(r.se[0].size(), 0.0));
      out.rmse_mean.assign(r.names.size(), std::vector<double>(r.se[0].size(), 0.0));
      for (const std::string& n : r.names) out.se_per_drop.emplace_back(n, "drop");
      out.trace = r.trace;
    }
    ++ok;
    for (std::size_t s = 0; s < r.names.size(); ++s) {
      double sum = 0.0;
      for (std::size_t p = 0; p < r.se[s].size(); ++p) {
        out.se_mean[s][p] += r.se[s][p];
        out.rmse_mean[s][p] += r.rmse[s][p] * r.rmse[s][p];
        sum += r.se[s][p];
      }
      out.se_per_drop[s].add(static_cast<double>(d), sum / static_cast<double>(r.se[s].size()));
    }
  }
  if (ok == 0) throw EstimationError("dynamic run: every drop failed");
  for (std::size_t s = 0; s < out.names.size(); ++s) {
    for (std::size_t p = 0; p < out.se_mean[s].size(); ++p) {
      out.se_mean[s][p] /= static_cast<double>(ok);
      out.rmse_mean[s][p] = std::sqrt(out.rmse_mean[s][p] / static_cast<double>(ok));
    }
  }
  return out;
}

LocalizationSummary run_localization(const ScenarioConfig& cfg, int drops, unsigned workers, int anchors) {
  LocalizationSummary out;
  const auto results = run_isolated<LocalizationDrop>(
      drops, workers, [&](std::uint64_t d) { return run_localization_drop(cfg, d, anchors); }, out.failed);
  for (const auto& r : results) {
    if (!r) continue;
    out.failures += r->failures;
    for (double e : r->calibrated_m) out.calibrated.add(e);
    for (double e : r->uncalibrated_m) out.uncalibrated.add(e);
  }
  if (out.calibrated.empty()) throw EstimationError("localization run: no position fixes");
  return out;
}

CoherentGainSummary run_coherent_gain(const ScenarioConfig& cfg, int drops, unsigned workers, PowerMode mode) {
  CoherentGainSummary out;
  const auto results = run_isolated<CoherentGainDrop>(
      drops, workers, [&](std::uint64_t d) { return run_coherent_gain_drop(cfg, d, mode); }, out.failed);
  std::size_t ok = 0;
  for (std::size_t d = 0; d < results.size(); ++d) {
    if (!results[d]) continue;
    const CoherentGainDrop& r = *results[d];
    if (ok == 0) {
      out.ports = r.ports;
      out.ideal_mean_db.assign(r.ports.size(), 0.0);
      out.uncalibrated_mean_db.assign(r.ports.size(), 0.0);
    }
    ++ok;
    std::vector<double> x;
    for (int p : r.ports) x.push_back(std::log2(static_cast<double>(p)));
    for (std::size_t i = 0; i < r.ports.size(); ++i) {
      out.ideal_mean_db[i] += r.ideal_snr_db[i];
      out.uncalibrated_mean_db[i] += r.uncalibrated_snr_db[i];
    }
    for (std::size_t i = 1; i < r.ports.size(); ++i) {
      out.ideal_increment.add(r.ideal_snr_db[i] - r.ideal_snr_db[i - 1]);
      out.uncalibrated_increment.add(r.uncalibrated_snr_db[i] - r.uncalibrated_snr_db[i - 1]);
    }
    if (x.size() >= 2) {
      out.ideal_slope.add(static_cast<double>(d), ls_slope(x, r.ideal_snr_db));
      out.uncalibrated_slope.add(static_cast<double>(d), ls_slope(x, r.uncalibrated_snr_db));
    }
  }
  if (ok == 0) throw EstimationError("coherent gain run: every drop failed");
  for (std::size_t i = 0; i < out.ports.size(); ++i) {
    out.ideal_mean_db[i] /= static_cast<double>(ok);
    out.uncalibrated_mean_db[i] /= static_cast<double>(ok);
  }
  if (out.ports.size() >= 2) {
    std::vector<double> x;
    for (int p : out.ports) x.push_back(std::log2(static_cast<double>(p)));
    out.ideal_mean_slope_db = ls_slope(x, out.ideal_mean_db);
    out.uncalibrated_mean_slope_db = ls_slope(x, out.uncalibrated_mean_db);
  }
  return out;
}

std::vector<CrlbPoint> run_crlb_sweep(const ScenarioConfig& cfg, const std::vector<double>& rho_db, int trials) {
  std::vector<CrlbPoint> out;
  for (std::size_t i = 0; i < rho_db.size(); ++i) out.push_back(run_crlb_point(cfg, rho_db[i], trials, i));
  return out;
}

unsigned resolve_workers(unsigned workers) {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

RunReport run_plan(const ScenarioConfig& cfg_in, const RunPlan& plan) {
  ScenarioConfig cfg = cfg_in;
  if (plan.seed) cfg.seed = *plan.seed;
  const int drops = plan.drops > 0 ? plan.drops : cfg.drops;
  OutputDir dir(plan.output_dir);
  auto wanted = [&plan](const std::string& name) {
    return plan.algorithms.empty() ||
           std::find(plan.algorithms.begin(), plan.algorithms.end(), name) != plan.algorithms.end();
  };
  RunReport report;
  DynamicOptions dyn;
  dyn.precoder = plan.precoder;
  dyn.robust_tracking = plan.robust_tracking;

  switch (plan.kind) {
    case PlanKind::quasi_static_cdf: {
      const QuasiStaticSummary s = run_quasi_static(cfg, drops, plan.workers, plan.precoder);
      for (const MetricSeries& m : s.se) {
        if (wanted(m.name())) dir.series_with_cdf("se", m);
      }
      for (const MetricSeries& m : s.rmse_deg) {
        if (wanted(m.name())) dir.series("rmse_" + m.name() + ".csv", m);
      }
      dir.emit("summary.csv", [&](std::ostream& os) {
        CsvWriter csv(os, {"algorithm", "se_p10", "se_median", "se_p90", "rmse_mean_deg"});
        for (std::size_t i = 0; i < s.se.size(); ++i) {
          if (!wanted(s.se[i].name())) continue;
          csv.row(s.se[i].name(), s.se[i].percentile(10), s.se[i].median(), s.se[i].percentile(90),
                  s.rmse_deg[i].mean());
        }
      });
      report.failed = s.failed;
      break;
    }
    case PlanKind::dynamic_cdf:
    case PlanKind::tracking_decay: {
      const DynamicSummary s = run_dynamic(cfg, drops, plan.workers, dyn);
      if (plan.kind == PlanKind::dynamic_cdf) {
        for (const MetricSeries& m : s.se_per_drop) {
          if (wanted(m.name())) dir.series_with_cdf("se", m);
        }
      } else {
        for (std::size_t i = 0; i < s.names.size(); ++i) {
          if (!wanted(s.names[i])) continue;
          dir.series("decay_" + s.names[i] + ".csv", pattern_series(s.names[i], s.se_mean[i]));
          dir.series("rmse_" + s.names[i] + ".csv", pattern_series(s.names[i], s.rmse_mean[i]));
          if (s.names[i] != "uncalibrated" && s.names[i] != "genie") {
            dir.series("retained_" + s.names[i] + ".csv", pattern_series(s.names[i], s.retained(s.names[i])));
          }
        }
        dir.emit("track_trace.csv", [&](std::ostream& os) { write_track_csv(s.trace, os); });
      }
      report.failed = s.failed;
      break;
    }
    case PlanKind::phase_rmse_sweep: {
      MetricSeries ml("ml_tls", "tx_power_dbm");
      std::vector<MetricSeries> tracked;
      for (const char* n : {"no_tracking", "direct", "sensing_assisted"}) tracked.emplace_back(n, "tx_power_dbm");
      for (double p : plan.tx_powers_dbm) {
        ScenarioConfig c = cfg;
        c.tx_power_dbm = p;
        const QuasiStaticSummary q = run_quasi_static(c, drops, plan.workers, plan.precoder);
        ml.add(p, q.rmse_of("ml_tls").mean());
        const DynamicSummary d = run_dynamic(c, drops, plan.workers, dyn);
        for (MetricSeries& t : tracked) t.add(p, d.rmse_over_patterns(t.name()));
        report.failed.insert(report.failed.end(), q.failed.begin(), q.failed.end());
        report.failed.insert(report.failed.end(), d.failed.begin(), d.failed.end());
      }
      dir.series("rmse_ml_tls.csv", ml);
      for (const MetricSeries& t : tracked) dir.series("rmse_" + t.name() + ".csv", t);
      break;
    }
    case PlanKind::localization: {
      const LocalizationSummary s = run_localization(cfg, drops, plan.workers);
      dir.series_with_cdf("loc_err", s.calibrated);
      dir.series_with_cdf("loc_err", s.uncalibrated);
      report.failed = s.failed;
      break;
    }
    case PlanKind::sensing_demo: {
      const SensingDemo s = run_sensing_demo(cfg);
      dir.emit("rd_uncalibrated.csv", [&](std::ostream& os) { write_range_doppler_csv(s.uncalibrated, os); });
      dir.emit("rd_calibrated.csv", [&](std::ostream& os) { write_range_doppler_csv(s.calibrated, os); });
      dir.emit("rd_mti.csv", [&](std::ostream& os) { write_range_doppler_csv(s.mti, os); });
      dir.emit("detections.csv", [&](std::ostream& os) { write_detections_csv(s.detections, os); });
      dir.emit("stft_uncalibrated.csv", [&](std::ostream& os) { write_stft_csv(s.stft_uncalibrated, os); });
      dir.emit("stft_calibrated.csv", [&](std::ostream& os) { write_stft_csv(s.stft_calibrated, os); });
      break;
    }
    case PlanKind::crlb_sweep: {
      const std::vector<CrlbPoint> pts = run_crlb_sweep(cfg, plan.rho_db, plan.crlb_trials);
      dir.emit("crlb.csv", [&](std::ostream& os) {
        CsvWriter csv(os, {"rho_db", "rmse_s", "crlb_s", "trials"});
        for (const CrlbPoint& p : pts) csv.row(p.rho_db, p.rmse_s, p.crlb_s, p.trials);
      });
      break;
    }
    case PlanKind::coherent_gain: {
      const CoherentGainSummary s = run_coherent_gain(cfg, drops, plan.workers, PowerMode::per_port);
      MetricSeries ideal("ideal", "ports");
      MetricSeries raw("uncalibrated", "ports");
      for (std::size_t i = 0; i < s.ports.size(); ++i) {
        ideal.add(s.ports[i], s.ideal_mean_db[i]);
        raw.add(s.ports[i], s.uncalibrated_mean_db[i]);
      }
      dir.series("gain_ideal.csv", ideal);
      dir.series("gain_uncalibrated.csv", raw);
      dir.series("slope_ideal.csv", s.ideal_slope);
      dir.series("slope_uncalibrated.csv", s.uncalibrated_slope);
      dir.series("increment_ideal.csv", s.ideal_increment);
      dir.series("increment_uncalibrated.csv", s.uncalibrated_increment);
      report.failed = s.failed;
      break;
    }
  }

  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["plan"] = plan_name(plan.kind);
  manifest["seed"] = cfg.seed;
  manifest["drops"] = drops;
  manifest["config"] = nlohmann::json::parse(dump_scenario(cfg));
  manifest["artifacts"] = nlohmann::json::array();
  for (const Artifact& a : dir.artifacts()) {
    manifest["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  manifest["failed_drops"] = nlohmann::json::array();
  for (const FailedDrop& f : report.failed) {
    manifest["failed_drops"].push_back({{"drop", f.drop}, {"message", f.message}});
  }
  const std::string text = manifest.dump(2) + "\n";
  const std::filesystem::path path = std::filesystem::path(dir.root()) / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  report.artifacts = dir.artifacts();
  report.manifest_path = path.string();
  return report;
}

}  // namespace simcal
