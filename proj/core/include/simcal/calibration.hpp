#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simcal/common.hpp"
#include "simcal/pilot.hpp"

namespace simcal {

/// Calibration coefficients with C(m, n, k, t) = c_ue(n, k, t) / c_bs(m, k, t).
///
/// Two storage forms:
///   - parametric (two-step ML-TLS): node gains at k = 0 and t = ref_time_s plus per-node
///     delays and frequency offsets, and per-link delay / frequency / raw ML coefficient;
///   - tabulated (per-subcarrier baselines): node gains listed per subcarrier.
/// Gauge: c_bs at reference_port is 1 (and its delay and frequency offset are 0).
struct CalibrationSet {
  std::string algorithm;
  std::string reference_convention = "c_bs[last port] = 1";
  int num_trp = 0;
  int num_ue = 0;
  int reference_port = 0;
  double subcarrier_spacing_hz = 0.0;
  double carrier_freq_hz = 0.0;
  double ref_time_s = 0.0;

  std::vector<cplx> c_bs;  // M (parametric) or M x K table, m-major
  std::vector<cplx> c_ue;  // N (parametric) or N x K table, n-major
  std::vector<int> subcarriers;  // non-empty: tabulated form

  bool has_tau = false;
  std::vector<double> tau_bs;
  std::vector<double> tau_ue;
  bool has_e = false;
  std::vector<double> e_bs;
  std::vector<double> e_ue;

  // Per-link results, index m * num_ue + n.
  std::vector<cplx> c_link;       // raw ML coefficient at ref time
  std::vector<double> tau_link;   // one-way tau_{n,m}
  std::vector<double> e_link;     // e_{n,m}

  bool tabulated() const { return !subcarriers.empty(); }
  std::size_t link_index(int m, int n) const { return static_cast<std::size_t>(m) * num_ue + n; }

  cplx bs(int m, int k, double t) const;
  cplx ue(int n, int k, double t) const;
  /// Node-consistent coefficient c_ue / c_bs, per-link delay when available.
  cplx link(int m, int n, int k, double t) const;
};

/// Per-subcarrier node coefficients from one of the matrix baselines.
struct NodeCoefficients {
  Eigen::VectorXcd c_bs;
  Eigen::VectorXcd c_ue;
  double eigenvalue = 0.0;  // TLS only
};

struct ArgosResult {
  Eigen::MatrixXcd c;  // M x N, column j referenced to user j
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid;
};

/// C = G ./ H^T with G (M x N, UL at the TRPs) and H (N x M, DL at the UEs).
ArgosResult argos(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h);

/// c_bs(m) = 1 / C(m, ref_user), gauge-fixed; c_ue(n) = C(ref port, n) after the same scaling.
NodeCoefficients argos_nodes(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h, int ref_user = 0);

/// Each user column C(:, n) / C(ref, n) averaged over valid users; c_bs = 1 / mean.
NodeCoefficients argos_mean(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h);

/// Minimises ||G^T diag(c_bs) - diag(c_ue) H||_F over unit-norm [c_bs; c_ue].
NodeCoefficients tls_classic(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h);

/// Rows (n, m) of the TLS system: G(m, n) at column m, -H(n, m) at column M + n.
Eigen::MatrixXcd tls_system(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& h);

struct DelayOptions {
  bool doubled = true;           // basis exp(-j 4 pi k df tau); false: exp(-j 2 pi k df tau)
  double window_s = 20e-9;       // search over [-window, window]
  double window_center_s = 0.0;
  double grid_oversampling = 8.0;
  int golden_iterations = 40;
};

struct DelayEstimate {
  double tau_s = 0.0;
  cplx coeff{};
  double objective = 0.0;  // |phi^H g|^2 at tau
};

/// tau = argmax |phi(tau)^H g|^2 over a coarse grid refined by golden section on the peak
/// bracket; coeff = phi^H g / phi^H phi. Absolute subcarrier indices enter phi.
DelayEstimate ml_delay_coeff(const CombSlice& g, double subcarrier_spacing_hz, const DelayOptions& options = {});

struct JointResult {
  Eigen::VectorXcd c_bs;  // M, gauge c_bs(M - 1) = 1
  Eigen::VectorXcd c_ue;  // N
  double eigenvalue = 0.0;
};

/// Hessian of J(b, u) = sum_{n,m} |b_m c(n, m) - u_n|^2 with c given N x M.
Eigen::MatrixXcd tls_joint_matrix(const Eigen::MatrixXcd& c_hat);
double tls_joint_cost(const Eigen::MatrixXcd& c_hat, const Eigen::VectorXcd& c_bs, const Eigen::VectorXcd& c_ue);
JointResult tls_joint(const Eigen::MatrixXcd& c_hat);

/// ML delay and coefficient per link, then TLS over the coefficient matrix. The links must
/// cover every (m, n) for n < num_ue at a common round-trip time.
CalibrationSet two_step_ml_tls(const std::vector<EquivalentChannel>& links, int num_trp, int num_ue,
                               double subcarrier_spacing_hz, double carrier_freq_hz,
                               const DelayOptions& options = {});

/// Unwraps phases sampled at ascending times by growing the baseline (each new sample is
/// unwrapped against the current rate estimate) and returns the least-squares slope, rad/s.
double estimate_phase_rate(const std::vector<double>& times_s, const std::vector<double>& phases);

/// Combines round trips at different times: per-link e from the rate of angle(c_link),
/// per-node e by the same row/column decomposition as the delays. The result is the round
/// trip at reference_index with has_e set.
CalibrationSet estimate_frequency_offsets(const std::vector<CalibrationSet>& round_trips, std::size_t reference_index);

/// Per-subcarrier baseline results assembled into a tabulated set.
CalibrationSet tabulate(const std::string& algorithm, const std::vector<int>& subcarriers,
                        const std::vector<NodeCoefficients>& per_subcarrier, double subcarrier_spacing_hz,
                        double carrier_freq_hz, double time_s);

/// Columns m,n,tau_hat_s,c_re,c_im.
void write_link_csv(const CalibrationSet& set, std::ostream& out);
/// Columns node,index,c_re,c_im,tau_s,e (k = 0, ref time; parametric sets only).
void write_node_csv(const CalibrationSet& set, std::ostream& out);

}  // namespace simcal
