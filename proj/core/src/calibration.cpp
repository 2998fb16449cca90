#include "simcal/calibration.hpp"

#include <algorithm>
#include <ostream>

#include "simcal/csv.hpp"
#include "simcal/hermitian_eigen.hpp"

namespace simcal {

namespace {

constexpr double kGolden = 0.6180339887498949;

std::size_t table_index(const std::vector<int>& subcarriers, int k) {
  const auto it = std::lower_bound(subcarriers.begin(), subcarriers.end(), k);
  if (it == subcarriers.end() || *it != k) {
    throw EstimationError("calibration: subcarrier " + std::to_string(k) + " not covered by tabulated coefficients");
  }
  return static_cast<std::size_t>(it - subcarriers.begin());
}

void check_shapes(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  if (g.rows() == 0 || g.cols() == 0 || g.rows() != h.cols() || g.cols() != h.rows()) {
    throw ValidationError("calibration: G must be M x N and H must be N x M");
  }
}

NodeCoefficients gauge_fixed(Eigen::VectorXcd c_bs, Eigen::VectorXcd c_ue) {
  const cplx ref = c_bs(c_bs.size() - 1);
  if (std::abs(ref) < 1e-300 || !std::isfinite(std::abs(ref))) {
    throw EstimationError("calibration: reference port coefficient vanished");
  }
  NodeCoefficients out;
  out.c_bs = c_bs / ref;
  out.c_ue = c_ue / ref;
  out.c_bs(out.c_bs.size() - 1) = 1.0;
  return out;
}

// Row/column decomposition x(m, n) ~ a_n - b_m with b at the reference port pinned to 0.
void decompose(const std::vector<double>& link, int num_trp, int num_ue, std::vector<double>& bs,
               std::vector<double>& ue) {
  std::vector<double> col_mean(num_trp, 0.0);
  for (int m = 0; m < num_trp; ++m) {
    for (int n = 0; n < num_ue; ++n) col_mean[m] += link[static_cast<std::size_t>(m) * num_ue + n];
    col_mean[m] /= num_ue;
  }
  const int ref = num_trp - 1;
  bs.assign(num_trp, 0.0);
  for (int m = 0; m < num_trp; ++m) bs[m] = -(col_mean[m] - col_mean[ref]);
  ue.assign(num_ue, 0.0);
  for (int n = 0; n < num_ue; ++n) {
    double sum = 0.0;
    for (int m = 0; m < num_trp; ++m) sum += link[static_cast<std::size_t>(m) * num_ue + n] + bs[m];
    ue[n] = sum / num_trp;
  }
}

}  // namespace

cplx CalibrationSet::bs(int m, int k, double t) const {
  if (tabulated()) return c_bs[static_cast<std::size_t>(m) * subcarriers.size() + table_index(subcarriers, k)];
  double phase = 0.0;
  if (has_tau) phase += -2.0 * kTwoPi * k * subcarrier_spacing_hz * tau_bs[m];
  if (has_e) phase += 2.0 * kTwoPi * e_bs[m] * carrier_freq_hz * (t - ref_time_s);
  return c_bs[m] * expj(phase);
}

cplx CalibrationSet::ue(int n, int k, double t) const {
  if (tabulated()) return c_ue[static_cast<std::size_t>(n) * subcarriers.size() + table_index(subcarriers, k)];
  double phase = 0.0;
  if (has_tau) phase += -2.0 * kTwoPi * k * subcarrier_spacing_hz * tau_ue[n];
  if (has_e) phase += 2.0 * kTwoPi * e_ue[n] * carrier_freq_hz * (t - ref_time_s);
  return c_ue[n] * expj(phase);
}

cplx CalibrationSet::link(int m, int n, int k, double t) const {
  if (tabulated() || tau_link.empty()) return ue(n, k, t) / bs(m, k, t);
  const std::size_t i = link_index(m, n);
  double phase = -2.0 * kTwoPi * k * subcarrier_spacing_hz * tau_link[i];
  if (has_e) phase += 2.0 * kTwoPi * e_link[i] * carrier_freq_hz * (t - ref_time_s);
  return c_ue[n] / c_bs[m] * expj(phase);
}

ArgosResult argos(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  check_shapes(g, h);
  ArgosResult out;
  out.c = Eigen::MatrixXcd::Zero(g.rows(), g.cols());
  out.valid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.rows(), g.cols());
  for (Eigen::Index m = 0; m < g.rows(); ++m) {
    for (Eigen::Index n = 0; n < g.cols(); ++n) {
      if (std::abs(h(n, m)) == 0.0) continue;
      out.c(m, n) = g(m, n) / h(n, m);
      out.valid(m, n) = 1;
    }
  }
  return out;
}

NodeCoefficients argos_nodes(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h, int ref_user) {
  const ArgosResult a = argos(g, h);
  const Eigen::Index num_trp = g.rows();
  if (ref_user < 0 || ref_user >= g.cols()) throw ValidationError("argos: reference user out of range");
  Eigen::VectorXcd c_bs(num_trp);
  for (Eigen::Index m = 0; m < num_trp; ++m) {
    if (!a.valid(m, ref_user) || std::abs(a.c(m, ref_user)) == 0.0) {
      throw EstimationError("argos: invalid coefficient for port " + std::to_string(m));
    }
    c_bs(m) = 1.0 / a.c(m, ref_user);
  }
  Eigen::VectorXcd c_ue(g.cols());
  for (Eigen::Index n = 0; n < g.cols(); ++n) c_ue(n) = a.c(num_trp - 1, n) * c_bs(num_trp - 1);
  return gauge_fixed(c_bs, c_ue);
}

NodeCoefficients argos_mean(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  const ArgosResult a = argos(g, h);
  const Eigen::Index num_trp = g.rows();
  const Eigen::Index ref = num_trp - 1;
  Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(num_trp);
  int users = 0;
  for (Eigen::Index n = 0; n < g.cols(); ++n) {
    if (!a.valid.col(n).all() || std::abs(a.c(ref, n)) == 0.0) continue;
    mean += a.c.col(n) / a.c(ref, n);
    ++users;
  }
  if (users == 0) throw EstimationError("argos_mean: no user with a complete coefficient column");
  mean /= static_cast<double>(users);
  Eigen::VectorXcd c_bs(num_trp);
  for (Eigen::Index m = 0; m < num_trp; ++m) {
    if (std::abs(mean(m)) == 0.0) throw EstimationError("argos_mean: averaged coefficient vanished");
    c_bs(m) = 1.0 / mean(m);
  }
  Eigen::VectorXcd c_ue = Eigen::VectorXcd::Zero(g.cols());
  for (Eigen::Index n = 0; n < g.cols(); ++n) {
    int count = 0;
    for (Eigen::Index m = 0; m < num_trp; ++m) {
      if (!a.valid(m, n)) continue;
      c_ue(n) += a.c(m, n) * c_bs(m);
      ++count;
    }
    if (count) c_ue(n) /= static_cast<double>(count);
  }
  return gauge_fixed(c_bs, c_ue);
}

Eigen::MatrixXcd tls_system(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  check_shapes(g, h);
  const Eigen::Index num_trp = g.rows();
  const Eigen::Index num_ue = g.cols();
  Eigen::MatrixXcd q = Eigen::MatrixXcd::Zero(num_trp * num_ue, num_trp + num_ue);
  for (Eigen::Index n = 0; n < num_ue; ++n) {
    for (Eigen::Index m = 0; m < num_trp; ++m) {
      const Eigen::Index row = n * num_trp + m;
      q(row, m) = g(m, n);
      q(row, num_trp + n) = -h(n, m);
    }
  }
  return q;
}

NodeCoefficients tls_classic(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h) {
  const Eigen::MatrixXcd q = tls_system(g, h);
  const Eigen::MatrixXcd qhq = q.adjoint() * q;
  const EigenPair pair = smallest_eigenpair(qhq);
  const Eigen::Index num_trp = g.rows();
  NodeCoefficients out = gauge_fixed(pair.vector.head(num_trp), pair.vector.tail(g.cols()));
  out.eigenvalue = pair.value;
  return out;
}

DelayEstimate ml_delay_coeff(const CombSlice& g, double subcarrier_spacing_hz, const DelayOptions& options) {
  std::vector<double> ks;
  std::vector<cplx> ys;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.valid.empty() && !g.valid[i]) continue;
    ks.push_back(static_cast<double>(g.subcarriers[i]));
    ys.push_back(g.values[i]);
  }
  if (ks.size() < 2) throw EstimationError("ml_delay_coeff: fewer than two usable subcarriers");
  double energy = 0.0;
  for (const cplx& y : ys) energy += std::norm(y);
  if (energy == 0.0) throw EstimationError("ml_delay_coeff: flat objective (all-zero observation)");
  if (!(options.window_s > 0.0)) throw ValidationError("ml_delay_coeff: search window must be positive");

  const double basis = (options.doubled ? 2.0 : 1.0) * kTwoPi * subcarrier_spacing_hz;
  const auto correlate = [&](double tau) {
    cplx acc{};
    for (std::size_t i = 0; i < ks.size(); ++i) acc += ys[i] * expj(basis * ks[i] * tau);  // phi^H g
    return acc;
  };
  const auto objective = [&](double tau) { return std::norm(correlate(tau)); };

  const auto [kmin, kmax] = std::minmax_element(ks.begin(), ks.end());
  const double count = static_cast<double>(ks.size());
  const double span_hz = (*kmax - *kmin) * subcarrier_spacing_hz * count / (count - 1.0);
  const double step = 1.0 / (options.grid_oversampling * span_hz * (options.doubled ? 2.0 : 1.0));
  const double lo = options.window_center_s - options.window_s;
  const long points = static_cast<long>(std::ceil(2.0 * options.window_s / step)) + 1;

  double best_tau = lo;
  double best = -1.0;
  for (long i = 0; i < points; ++i) {
    const double tau = lo + static_cast<double>(i) * step;
    const double value = objective(tau);
    if (value > best) {
      best = value;
      best_tau = tau;
    }
  }

  double a = best_tau - step;
  double b = best_tau + step;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < options.golden_iterations; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = objective(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = objective(x1);
    }
  }
  double tau = 0.5 * (a + b);
  double value = objective(tau);
  if (best > value) {
    tau = best_tau;
    value = best;
  }
  // Value comparisons stall at sqrt(eps) on a flat peak; the derivative's root does not.
  for (int it = 0; it < 4; ++it) {
    cplx s{};
    cplx s1{};
    cplx s2{};
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double w = basis * ks[i];
      const cplx term = ys[i] * expj(w * tau);
      s += term;
      s1 += cplx{0.0, w} * term;
      s2 -= w * w * term;
    }
    const double d1 = 2.0 * std::real(std::conj(s) * s1);
    const double d2 = 2.0 * (std::norm(s1) + std::real(std::conj(s) * s2));
    if (!(d2 < 0.0)) break;
    const double next = tau - d1 / d2;
    if (!(std::abs(next - best_tau) <= step) || next == tau) break;
    tau = next;
  }
  value = objective(tau);
  DelayEstimate out;
  out.tau_s = tau;
  out.coeff = correlate(tau) / count;
  out.objective = value;
  return out;
}

Eigen::MatrixXcd tls_joint_matrix(const Eigen::MatrixXcd& c_hat) {
  const Eigen::Index num_ue = c_hat.rows();
  const Eigen::Index num_trp = c_hat.cols();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(num_trp + num_ue, num_trp + num_ue);
  for (Eigen::Index m = 0; m < num_trp; ++m) a(m, m) = c_hat.col(m).squaredNorm();
  for (Eigen::Index n = 0; n < num_ue; ++n) {
    a(num_trp + n, num_trp + n) = static_cast<double>(num_trp);
    for (Eigen::Index m = 0; m < num_trp; ++m) {
      a(m, num_trp + n) = -std::conj(c_hat(n, m));
      a(num_trp + n, m) = -c_hat(n, m);
    }
  }
  return a;
}

double tls_joint_cost(const Eigen::MatrixXcd& c_hat, const Eigen::VectorXcd& c_bs, const Eigen::VectorXcd& c_ue) {
  double j = 0.0;
  for (Eigen::Index n = 0; n < c_hat.rows(); ++n) {
    for (Eigen::Index m = 0; m < c_hat.cols(); ++m) j += std::norm(c_bs(m) * c_hat(n, m) - c_ue(n));
  }
  return j;
}

JointResult tls_joint(const Eigen::MatrixXcd& c_hat) {
  if (c_hat.rows() < 1 || c_hat.cols() < 1) throw ValidationError("tls_joint: empty coefficient matrix");
  if (!c_hat.allFinite()) throw ValidationError("tls_joint: non-finite coefficient");
  const EigenPair pair = smallest_eigenpair(tls_joint_matrix(c_hat));
  const Eigen::Index num_trp = c_hat.cols();
  const NodeCoefficients fixed = gauge_fixed(pair.vector.head(num_trp), pair.vector.tail(c_hat.rows()));
  return {fixed.c_bs, fixed.c_ue, pair.value};
}

CalibrationSet two_step_ml_tls(const std::vector<EquivalentChannel>& links, int num_trp, int num_ue,
                               double subcarrier_spacing_hz, double carrier_freq_hz, const DelayOptions& options) {
  if (num_trp < 1 || num_ue < 1) throw ValidationError("two_step_ml_tls: need at least one TRP and one UE");
  if (links.empty()) throw EstimationError("two_step_ml_tls: no equivalent channels");
  CalibrationSet set;
  set.algorithm = "ml_tls";
  set.num_trp = num_trp;
  set.num_ue = num_ue;
  set.reference_port = num_trp - 1;
  set.subcarrier_spacing_hz = subcarrier_spacing_hz;
  set.carrier_freq_hz = carrier_freq_hz;
  set.ref_time_s = links.front().time_s;
  const std::size_t count = static_cast<std::size_t>(num_trp) * num_ue;
  set.c_link.assign(count, cplx{});
  set.tau_link.assign(count, 0.0);
  std::vector<std::uint8_t> seen(count, 0);

  Eigen::MatrixXcd c_hat(num_ue, num_trp);
  for (const EquivalentChannel& eq : links) {
    if (eq.m < 0 || eq.m >= num_trp || eq.n < 0 || eq.n >= num_ue) continue;
    const DelayEstimate est = ml_delay_coeff(eq.values, subcarrier_spacing_hz, options);
    const std::size_t i = set.link_index(eq.m, eq.n);
    set.c_link[i] = est.coeff;
    set.tau_link[i] = est.tau_s;
    seen[i] = 1;
    c_hat(eq.n, eq.m) = est.coeff;
  }
  if (std::find(seen.begin(), seen.end(), std::uint8_t{0}) != seen.end()) {
    throw EstimationError("two_step_ml_tls: equivalent channels do not cover every link");
  }
  const JointResult joint = tls_joint(c_hat);
  set.c_bs.assign(joint.c_bs.data(), joint.c_bs.data() + joint.c_bs.size());
  set.c_ue.assign(joint.c_ue.data(), joint.c_ue.data() + joint.c_ue.size());
  decompose(set.tau_link, num_trp, num_ue, set.tau_bs, set.tau_ue);
  set.has_tau = true;
  return set;
}

double estimate_phase_rate(const std::vector<double>& times_s, const std::vector<double>& phases) {
  const std::size_t n = times_s.size();
  if (n < 2 || phases.size() != n) throw EstimationError("estimate_phase_rate: need at least two samples");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(times_s[i] > times_s[i - 1])) throw ValidationError("estimate_phase_rate: times must be strictly ascending");
  }
  std::vector<double> unwrapped(n);
  unwrapped[0] = phases[0];
  unwrapped[1] = phases[0] + wrap_phase(phases[1] - phases[0]);
  double slope = (unwrapped[1] - unwrapped[0]) / (times_s[1] - times_s[0]);
  double intercept = unwrapped[0] - slope * times_s[0];
  for (std::size_t i = 2; i < n; ++i) {
    const double predicted = intercept + slope * times_s[i];
    unwrapped[i] = predicted + wrap_phase(phases[i] - predicted);
    double st = 0.0;
    double sp = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      st += times_s[j];
      sp += unwrapped[j];
    }
    const double count = static_cast<double>(i + 1);
    const double tm = st / count;
    const double pm = sp / count;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      num += (times_s[j] - tm) * (unwrapped[j] - pm);
      den += (times_s[j] - tm) * (times_s[j] - tm);
    }
    slope = num / den;
    intercept = pm - slope * tm;
  }
  return slope;
}

CalibrationSet estimate_frequency_offsets(const std::vector<CalibrationSet>& round_trips, std::size_t reference_index) {
  if (round_trips.size() < 2) throw EstimationError("frequency offset: need at least two round trips");
  if (reference_index >= round_trips.size()) throw ValidationError("frequency offset: reference index out of range");
  CalibrationSet out = round_trips[reference_index];
  const std::size_t count = out.c_link.size();
  std::vector<double> times;
  for (const CalibrationSet& rt : round_trips) {
    if (rt.c_link.size() != count) throw ValidationError("frequency offset: round trips have different link sets");
    times.push_back(rt.ref_time_s);
  }
  out.e_link.assign(count, 0.0);
  std::vector<double> phases(round_trips.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t r = 0; r < round_trips.size(); ++r) phases[r] = std::arg(round_trips[r].c_link[i]);
    out.e_link[i] = estimate_phase_rate(times, phases) / (2.0 * kTwoPi * out.carrier_freq_hz);
  }
  decompose(out.e_link, out.num_trp, out.num_ue, out.e_bs, out.e_ue);
  out.has_e = true;
  return out;
}

CalibrationSet tabulate(const std::string& algorithm, const std::vector<int>& subcarriers,
                        const std::vector<NodeCoefficients>& per_subcarrier, double subcarrier_spacing_hz,
                        double carrier_freq_hz, double time_s) {
  if (subcarriers.empty() || subcarriers.size() != per_subcarrier.size()) {
    throw ValidationError("tabulate: one coefficient set per subcarrier required");
  }
  if (!std::is_sorted(subcarriers.begin(), subcarriers.end())) throw ValidationError("tabulate: subcarriers unsorted");
  CalibrationSet set;
  set.algorithm = algorithm;
  set.num_trp = static_cast<int>(per_subcarrier.front().c_bs.size());
  set.num_ue = static_cast<int>(per_subcarrier.front().c_ue.size());
  set.reference_port = set.num_trp - 1;
  set.subcarrier_spacing_hz = subcarrier_spacing_hz;
  set.carrier_freq_hz = carrier_freq_hz;
  set.ref_time_s = time_s;
  set.subcarriers = subcarriers;
  const std::size_t kk = subcarriers.size();
  set.c_bs.assign(static_cast<std::size_t>(set.num_trp) * kk, cplx{});
  set.c_ue.assign(static_cast<std::size_t>(set.num_ue) * kk, cplx{});
  for (std::size_t k = 0; k < kk; ++k) {
    for (int m = 0; m < set.num_trp; ++m) set.c_bs[m * kk + k] = per_subcarrier[k].c_bs(m);
    for (int n = 0; n < set.num_ue; ++n) set.c_ue[n * kk + k] = per_subcarrier[k].c_ue(n);
  }
  return set;
}

void write_link_csv(const CalibrationSet& set, std::ostream& out) {
  CsvWriter csv(out, {"m", "n", "tau_hat_s", "c_re", "c_im"});
  for (int m = 0; m < set.num_trp; ++m) {
    for (int n = 0; n < set.num_ue; ++n) {
      const std::size_t i = set.link_index(m, n);
      const double tau = i < set.tau_link.size() ? set.tau_link[i] : 0.0;
      const cplx c = set.tabulated() ? set.link(m, n, set.subcarriers.front(), set.ref_time_s)
                                     : set.c_ue[n] / set.c_bs[m];
      csv.row(m, n, tau, c.real(), c.imag());
    }
  }
}

void write_node_csv(const CalibrationSet& set, std::ostream& out) {
  CsvWriter csv(out, {"node", "index", "c_re", "c_im", "tau_s", "e"});
  if (set.tabulated()) return;
  for (int m = 0; m < set.num_trp; ++m) {
    csv.row("trp", m, set.c_bs[m].real(), set.c_bs[m].imag(), set.has_tau ? set.tau_bs[m] : 0.0,
            set.has_e ? set.e_bs[m] : 0.0);
  }
  for (int n = 0; n < set.num_ue; ++n) {
    csv.row("ue", n, set.c_ue[n].real(), set.c_ue[n].imag(), set.has_tau ? set.tau_ue[n] : 0.0,
            set.has_e ? set.e_ue[n] : 0.0);
  }
}

}  // namespace simcal
