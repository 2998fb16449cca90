#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "simcal/common.hpp"

namespace simcal {

enum class PrecoderKind { mrt, zf };

/// per_port: every port may radiate unit power, ||W||_F^2 = M. normalized: ||W||_F^2 = 1.
enum class PowerMode { per_port, normalized };

struct Precoder {
  Eigen::MatrixXcd w;                   // ports x streams
  std::vector<std::uint8_t> stream_ok;  // 0: stream dropped by a rank-deficient ZF solve
};

/// DL channel estimate (users x ports) predicted from UL CSI (ports x users) and BS
/// calibration gains: h(n, m) = g(m, n) c_bs(m). Exact up to one scalar per user.
Eigen::MatrixXcd dl_from_ul(const Eigen::MatrixXcd& ul, const Eigen::VectorXcd& c_bs);

/// MRT: columns conj(h_n) / |h_n|. ZF: pseudo-inverse columns, each normalised. In both
/// cases columns share the power budget equally.
Precoder calibrated_precoder(const Eigen::MatrixXcd& h_est, PrecoderKind kind, PowerMode mode,
                             double rank_tolerance = 1e-9);

/// SINR per stream s: |h_s^T w_s|^2 / (sum_{j != s} |h_s^T w_j|^2 + noise) with the true
/// channel h (users x ports, row s feeds stream s).
std::vector<double> sinr(const Eigen::MatrixXcd& h_true, const Precoder& precoder, double noise_variance);

/// sum_s log2(1 + sinr_s), bit/s/Hz.
double spectral_efficiency(const std::vector<double>& sinrs);

/// RMS of the wrapped phase difference in degrees, differences wrapped to (-180, 180].
double phase_rmse_deg(const std::vector<cplx>& estimate, const std::vector<cplx>& truth);

/// Named sample list with an x-axis descriptor; percentile uses linear interpolation
/// between order statistics (p in [0, 100]).
class MetricSeries {
 public:
  MetricSeries() = default;
  MetricSeries(std::string name, std::string x_name) : name_(std::move(name)), x_name_(std::move(x_name)) {}

  void add(double x, double value);
  void add(double value) { add(static_cast<double>(values_.size()), value); }

  const std::string& name() const { return name_; }
  const std::string& x_name() const { return x_name_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }

  double percentile(double p) const;
  double median() const { return percentile(50.0); }
  double mean() const;

  /// Columns <x_name>,value.
  void write_csv(std::ostream& out) const;

 private:
  std::string name_;
  std::string x_name_ = "index";
  std::vector<double> x_;
  std::vector<double> values_;
};

/// Empirical CDF: ascending values with P(X <= value) = rank / n (ties collapse to the
/// last rank).
std::vector<std::pair<double, double>> cdf(const std::vector<double>& samples);

/// Columns value,prob.
void write_cdf_csv(const std::vector<std::pair<double, double>>& points, std::ostream& out);

/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace simcal
