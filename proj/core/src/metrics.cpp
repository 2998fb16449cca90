#include "simcal/metrics.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "simcal/csv.hpp"

namespace simcal {

Eigen::MatrixXcd dl_from_ul(const Eigen::MatrixXcd& ul, const Eigen::VectorXcd& c_bs) {
  if (ul.rows() != c_bs.size()) throw ValidationError("dl_from_ul: one calibration gain per port required");
  Eigen::MatrixXcd h(ul.cols(), ul.rows());
  for (Eigen::Index n = 0; n < ul.cols(); ++n) {
    for (Eigen::Index m = 0; m < ul.rows(); ++m) h(n, m) = ul(m, n) * c_bs(m);
  }
  return h;
}

Precoder calibrated_precoder(const Eigen::MatrixXcd& h_est, PrecoderKind kind, PowerMode mode, double rank_tolerance) {
  const Eigen::Index users = h_est.rows();
  const Eigen::Index ports = h_est.cols();
  if (users < 1 || ports < 1) throw ValidationError("precoder: empty channel");
  Precoder out;
  out.w = Eigen::MatrixXcd::Zero(ports, users);
  out.stream_ok.assign(static_cast<std::size_t>(users), 1);

  if (kind == PrecoderKind::mrt) {
    for (Eigen::Index s = 0; s < users; ++s) {
      const double norm = h_est.row(s).norm();
      if (norm == 0.0) {
        out.stream_ok[s] = 0;
        continue;
      }
      out.w.col(s) = h_est.row(s).adjoint() / norm;
    }
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_est, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > rank_tolerance * smax) ++rank;
    }
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < rank; ++i) inv(i) = 1.0 / sv(i);
    const Eigen::MatrixXcd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
    for (Eigen::Index s = 0; s < users; ++s) {
      const double norm = pinv.col(s).norm();
      if (norm == 0.0) {
        out.stream_ok[s] = 0;
        continue;
      }
      out.w.col(s) = pinv.col(s) / norm;
    }
    // Streams beyond the channel rank cannot be separated.
    for (Eigen::Index s = rank; s < users; ++s) out.stream_ok[s] = 0;
  }

  Eigen::Index active = 0;
  for (std::uint8_t ok : out.stream_ok) active += ok;
  for (Eigen::Index s = 0; s < users; ++s) {
    if (!out.stream_ok[s]) out.w.col(s).setZero();
  }
  if (active > 0) {
    const double budget = mode == PowerMode::per_port ? static_cast<double>(ports) : 1.0;
    out.w *= std::sqrt(budget / static_cast<double>(active));
  }
  return out;
}

std::vector<double> sinr(const Eigen::MatrixXcd& h_true, const Precoder& precoder, double noise_variance) {
  if (h_true.cols() != precoder.w.rows() || h_true.rows() != precoder.w.cols()) {
    throw ValidationError("sinr: channel and precoder dimensions differ");
  }
  const Eigen::MatrixXcd gains = h_true * precoder.w;  // (user s, stream j)
  std::vector<double> out(static_cast<std::size_t>(h_true.rows()), 0.0);
  for (Eigen::Index s = 0; s < h_true.rows(); ++s) {
    if (!precoder.stream_ok[s]) continue;
    double interference = 0.0;
    for (Eigen::Index j = 0; j < gains.cols(); ++j) {
      if (j != s) interference += std::norm(gains(s, j));
    }
    const double den = interference + noise_variance;
    const double sig = std::norm(gains(s, s));
    out[s] = den > 0.0 ? sig / den : (sig > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return out;
}

double spectral_efficiency(const std::vector<double>& sinrs) {
  double se = 0.0;
  for (double s : sinrs) se += std::log2(1.0 + s);
  return se;
}

double phase_rmse_deg(const std::vector<cplx>& estimate, const std::vector<cplx>& truth) {
  if (estimate.size() != truth.size() || estimate.empty()) {
    throw ValidationError("phase_rmse: inputs must be non-empty and aligned");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = wrap_phase(std::arg(estimate[i]) - std::arg(truth[i]));
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(estimate.size())) * 180.0 / kPi;
}

void MetricSeries::add(double x, double value) {
  x_.push_back(x);
  values_.push_back(value);
}

double MetricSeries::percentile(double p) const {
  if (values_.empty()) throw ValidationError("percentile of an empty series '" + name_ + "'");
  std::vector<double> sorted = values_;
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double MetricSeries::mean() const {
  if (values_.empty()) throw ValidationError("mean of an empty series '" + name_ + "'");
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

void MetricSeries::write_csv(std::ostream& out) const {
  if (values_.empty()) throw ValidationError("refusing to export empty series '" + name_ + "'");
  CsvWriter csv(out, {x_name_, "value"});
  for (std::size_t i = 0; i < values_.size(); ++i) csv.row(x_[i], values_[i]);
}

std::vector<std::pair<double, double>> cdf(const std::vector<double>& samples) {
  if (samples.empty()) throw ValidationError("cdf: empty sample list");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

void write_cdf_csv(const std::vector<std::pair<double, double>>& points, std::ostream& out) {
  CsvWriter csv(out, {"value", "prob"});
  for (const auto& [v, p] : points) csv.row(v, p);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("ls_slope: need two aligned points");
  double xm = 0.0;
  double ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(x.size());
  ym /= static_cast<double>(x.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  if (den == 0.0) throw ValidationError("ls_slope: x values are all equal");
  return num / den;
}

}  // namespace simcal
