#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simcal/calibration.hpp"
#include "simcal/channel.hpp"
#include "simcal/metrics.hpp"
#include "simcal/pilot.hpp"
#include "simcal/rng.hpp"
#include "simcal/scenario.hpp"
#include "simcal/sensing.hpp"
#include "simcal/tracking.hpp"

namespace simcal {

/// One Monte Carlo realisation: geometry, impairments, paths and the drop's noise stream.
/// UEs [0, num_calib_ue) take part in calibration; the rest are served in evaluation.
class Drop {
 public:
  Drop(const ScenarioConfig& cfg, std::uint64_t index);

  const ScenarioConfig& cfg() const { return cfg_; }
  std::uint64_t index() const { return index_; }
  const DropGeometry& geometry() const { return geometry_; }
  const ImpairmentMap& impairments() const { return impairments_; }
  ImpairmentMap& impairments() { return impairments_; }
  const LinkPathSet& link(int m, int n) const { return paths_[static_cast<std::size_t>(m) * cfg_.num_ue + n]; }
  std::vector<LinkPathSet>& paths() { return paths_; }
  double noise_var() const { return noise_var_; }

  cplx ota(int m, int n, int k, double t) const;
  cplx ul(int m, int n, int k, double t) const;  // G, received at TRP m
  cplx dl(int m, int n, int k, double t) const;  // H, received at UE n
  cplx true_c(int m, int n, int k, double t) const;
  cplx true_bs(int m, int k, double t) const;

  /// clean + CN(0, noise_var) drawn from the drop's noise stream.
  cplx observe(cplx clean);

 private:
  ScenarioConfig cfg_;
  std::uint64_t index_;
  DropGeometry geometry_;
  ImpairmentMap impairments_;
  std::vector<LinkPathSet> paths_;
  double noise_var_;
  Rng noise_;
};

/// Evaluation subcarriers spread evenly over the FFT band.
std::vector<int> eval_subcarriers(const ScenarioConfig& cfg);

/// ML delay search window covering the round-trip-halved link delay range.
DelayOptions delay_options(const ScenarioConfig& cfg);

/// CSI-RS on the TRP combs at centre - turnaround / 2, CARS on the UE combs at
/// centre + turnaround / 2, for every TRP and calibration UE.
std::vector<EquivalentChannel> simulate_round_trip(Drop& drop, double centre_s);

CalibrationSet calibrate_ml_tls(Drop& drop, double centre_s);

/// Round trips at every centre time; frequency offsets from their phase progression.
CalibrationSet calibrate_ml_tls_schedule(Drop& drop, const std::vector<double>& centres_s, std::size_t reference_index);

/// Noisy one-way measurements on a subcarrier list for UEs [first_ue, first_ue + count).
struct OneWayMeasurement {
  std::vector<int> subcarriers;
  double time_s = 0.0;
  std::vector<Eigen::MatrixXcd> g;  // per subcarrier, M x count (UL at the TRPs)
  std::vector<Eigen::MatrixXcd> h;  // per subcarrier, count x M (DL at the UEs); empty if not requested
};

OneWayMeasurement measure_one_way(Drop& drop, const std::vector<int>& subcarriers, double t, int first_ue, int count,
                                  bool with_dl);

enum class Baseline { argos, argos_mean, tls };
CalibrationSet calibrate_baseline(Baseline kind, const OneWayMeasurement& meas, double df, double fc);

/// Per-port BS gain at a subcarrier; empty function means uncalibrated (use UL as DL).
using BsGain = std::function<cplx(int m, int k)>;

/// Mean SE over the measurement subcarriers: precoder from meas.g and `gain`, SINR on the
/// true DL channel of the measured UEs at meas.time_s.
double evaluate_se(const Drop& drop, const OneWayMeasurement& meas, int first_ue, const BsGain& gain,
                   PrecoderKind kind, PowerMode mode);

/// Phase RMSE (degrees) of a link coefficient over calibration links and subcarriers.
double link_phase_rmse(const Drop& drop, const std::vector<int>& subcarriers, double t,
                       const std::function<cplx(int m, int n, int k)>& estimate);

// ---- per-drop experiments ----

struct NamedValues {
  std::vector<std::string> names;
  std::vector<double> values;
  double get(const std::string& name) const;
  void set(const std::string& name, double value);
};

struct QuasiStaticDrop {
  NamedValues se;
  NamedValues phase_rmse_deg;
};

/// Static UEs; calibration, baselines and precoding in one slot at the first CARS time.
QuasiStaticDrop run_quasi_static_drop(const ScenarioConfig& cfg, std::uint64_t drop, PrecoderKind kind);

struct DynamicOptions {
  bool robust_tracking = false;
  PrecoderKind precoder = PrecoderKind::zf;
};

/// Per series name: SE and link phase RMSE for tracking patterns 1..P after the last
/// round trip. Series: uncalibrated, no_tracking, direct, sensing_assisted,
/// ml_tls_propagated, genie.
struct DynamicDrop {
  std::vector<std::string> names;
  std::vector<std::vector<double>> se;    // [series][pattern - 1]
  std::vector<std::vector<double>> rmse;  // [series][pattern - 1]
  std::vector<TraceRow> trace;            // sensing-assisted trace, first calibration UE
  std::size_t series(const std::string& name) const;
};

DynamicDrop run_dynamic_drop(const ScenarioConfig& cfg, std::uint64_t drop, const DynamicOptions& options = {});

/// Per calibration UE: position error from TRP ranges (first num_anchors TRPs), with and
/// without removing the estimated link delay.
struct LocalizationDrop {
  std::vector<double> calibrated_m;
  std::vector<double> uncalibrated_m;
  int failures = 0;
};

LocalizationDrop run_localization_drop(const ScenarioConfig& cfg, std::uint64_t drop, int num_anchors = 4);

/// One UE at the centre of a TRP circle; SNR for port counts 1, 2, 4, ... M.
struct CoherentGainDrop {
  std::vector<int> ports;
  std::vector<double> ideal_snr_db;
  std::vector<double> uncalibrated_snr_db;
};

CoherentGainDrop run_coherent_gain_drop(const ScenarioConfig& cfg, std::uint64_t drop, PowerMode mode,
                                        double radius_m = 100.0);

/// Single TRP, single UE static LOS with a fixed frequency offset plus an injected mover.
struct SensingDemoOptions {
  double e_offset = 30e-9;
  double los_distance_m = 40.0;
  double mover_extra_m = 65.0;
  double mover_velocity_mps = -3.2;
  double mover_gain_db = -10.0;
  double pfa = 1e-6;
};

struct SensingDemo {
  RangeDopplerMap uncalibrated;
  RangeDopplerMap calibrated;
  RangeDopplerMap mti;
  std::vector<Detection> detections;
  std::vector<StftFrame> stft_uncalibrated;
  std::vector<StftFrame> stft_calibrated;
  double los_range_m = 0.0;
  std::size_t uncalibrated_peak_doppler_bin = 0;
  std::size_t calibrated_peak_doppler_bin = 0;
};

SensingDemo run_sensing_demo(const ScenarioConfig& cfg, const SensingDemoOptions& options = {});

/// One-way delay variance bound for round-trip data on a comb of K subcarriers spaced df:
/// 3 / (8 rho pi^2 df^2 K (K^2 - 1)), i.e. the single-snapshot distance bound / (4 c^2).
double round_trip_delay_crlb_s2(double rho, int k, double comb_spacing_hz);

struct CrlbPoint {
  double rho_db = 0.0;
  double rmse_s = 0.0;
  double crlb_s = 0.0;  // sqrt of the bound
  int trials = 0;
};

/// ML delay RMSE on a synthetic CARS comb (K / N subcarriers spaced M N df) at SNR rho.
CrlbPoint run_crlb_point(const ScenarioConfig& cfg, double rho_db, int trials, std::uint64_t stream_index = 0);

/// Runs fn(drop) for drop in [0, count) on `workers` threads; results land by index.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace simcal
