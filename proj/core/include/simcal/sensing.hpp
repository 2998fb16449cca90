#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "simcal/calibration.hpp"
#include "simcal/channel.hpp"
#include "simcal/common.hpp"
#include "simcal/scenario.hpp"

namespace simcal {

/// One link sampled on a uniform comb (K entries) at uniform times (L entries), l fastest.
struct LinkGrid {
  ChannelMeta meta;
  std::vector<cplx> values;

  std::size_t num_k() const { return meta.num_k(); }
  std::size_t num_t() const { return meta.num_t(); }
  cplx& at(std::size_t k, std::size_t l) { return values[k * meta.num_t() + l]; }
  const cplx& at(std::size_t k, std::size_t l) const { return values[k * meta.num_t() + l]; }
};

LinkGrid link_grid(const ChannelTensor& ch, int m, int n);

struct SensedPath {
  cplx alpha_hat{};
  double d_hat_m = 0.0;
  double v_hat_mps = 0.0;
  double power_db = 0.0;
};

/// Removes timing, frequency and RF-ratio phase from UL samples with the parametric
/// square root sqrt(conj(c0)) exp(+j 2 pi k df tau) exp(-j 2 pi e fc (t - t_ref)), where c0
/// is the link coefficient at the reference time. Links of UEs outside the calibration set
/// are dropped. Throws EstimationError without delay and frequency estimates.
ChannelTensor recover_ota(const ChannelTensor& ul, const CalibrationSet& cal);
LinkGrid recover_link(const LinkGrid& ul, const CalibrationSet& cal, int m, int n);

enum class Window { rectangular, hann };

struct RangeDopplerMap {
  std::size_t num_range = 0;
  std::size_t num_doppler = 0;
  std::vector<cplx> cells;        // range-major, Doppler fastest, normalised by K * L
  std::vector<double> power;      // |cell|^2
  std::vector<double> power_db;   // -inf for zero cells
  std::vector<double> range_axis_m;
  std::vector<double> velocity_axis_mps;
  std::size_t zero_doppler_index = 0;
  double range_bin_m = 0.0;
  double velocity_bin_mps = 0.0;

  std::size_t index(std::size_t r, std::size_t p) const { return r * num_doppler + p; }
  /// Flat unit map for CFAR experiments (axes zero).
  static RangeDopplerMap from_power(std::size_t num_range, std::size_t num_doppler, std::vector<double> power);
};

/// Inverse FFT across k (range), forward FFT across l (Doppler) shifted so that bin
/// zero_doppler_index is zero velocity. Range bin r is r c / (K df_comb); velocity bin p is
/// p c / (fc L T).
RangeDopplerMap range_doppler(const LinkGrid& grid, Window window = Window::rectangular);

double unambiguous_velocity(double carrier_freq_hz, double pilot_interval_s);
double unambiguous_range(double comb_spacing_hz);

struct Detection {
  std::size_t range_bin = 0;
  std::size_t doppler_bin = 0;
  double range_m = 0.0;
  double velocity_mps = 0.0;
  double power_db = 0.0;
  SensedPath path;
};

struct CfarOptions {
  double pfa = 1e-3;
  int guard = 2;
  int train = 8;
};

/// alpha = N (pfa^(-1/N) - 1) for N training cells of the square annulus.
double cfar_scale(int guard, int train, double pfa);
/// Cyclic cell-averaging threshold per cell.
std::vector<double> cfar_threshold(const RangeDopplerMap& map, const CfarOptions& options);

/// Local maxima above the CA-CFAR threshold, converted to paths by quadratic interpolation.
std::vector<Detection> cfar_detect(const RangeDopplerMap& map, const CfarOptions& options = {});

enum class MtiMode { mean_subtraction, two_pulse };

/// Mean subtraction removes the slow-time mean per subcarrier. Two-pulse output is
/// x(l) - x(l - 1) with x(-1) := x(0).
LinkGrid mti_filter(const LinkGrid& grid, MtiMode mode = MtiMode::mean_subtraction);

struct StftFrame {
  double time_s = 0.0;  // window centre
  double freq_hz = 0.0;
  double magnitude = 0.0;
  double bin_hz = 0.0;
};

/// Dominant frequency per window of a slow-time row sampled every interval_s.
std::vector<StftFrame> stft_offset(const std::vector<cplx>& row, double interval_s, std::size_t window_len,
                                   std::size_t hop, Window window = Window::rectangular);

/// Multipath channel from sensed paths on the grid of `meta`. Empty path list throws.
LinkGrid predict_channel(const std::vector<SensedPath>& paths, const ChannelMeta& meta);

struct PathEstimateOptions {
  std::size_t max_paths = 1;
  double min_relative_db = -30.0;  // stop when a path is this far below the first
  int rounds = 4;
  int golden_iterations = 40;
};

/// Successive-cancellation ML estimate of (alpha, d, v): FFT peak, then alternating
/// golden-section refinement of d and v within one bin of the peak.
std::vector<SensedPath> estimate_paths(const LinkGrid& grid, const PathEstimateOptions& options = {});

struct CrlbReport {
  double rho = 0.0;
  int k = 0;
  int l = 0;
  double d_crlb_m2 = 0.0;
  double v_crlb = 0.0;
  double theta_d = 0.0;
  double theta_v = 0.0;
  double theta_total = 0.0;
};

CrlbReport crlb(double rho, int k, int l, double subcarrier_spacing_hz, double interval_s, double carrier_freq_hz);

struct LocalizationResult {
  Vec3 position{};
  double residual_rms_m = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton on sum_m (|p - p_m| - d_m)^2 in the plane, started at the anchor centroid.
LocalizationResult localize(const std::vector<Vec3>& anchors, const std::vector<double>& ranges, int max_iterations = 50,
                            double tolerance_m = 1e-9);

/// Columns range_m,velocity_mps,power_db.
void write_range_doppler_csv(const RangeDopplerMap& map, std::ostream& out);
/// Columns range_m,velocity_mps,power_db,range_bin,doppler_bin.
void write_detections_csv(const std::vector<Detection>& detections, std::ostream& out);

}  // namespace simcal
