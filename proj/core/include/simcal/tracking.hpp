#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "simcal/common.hpp"

namespace simcal {

struct TrackOptions {
  bool robust_aggregate = false;  // median over k after removing the k-linear part
  double alias_margin_rad = 0.1 * kPi;  // an increment within this of pi raises the flag
};

/// Tracking state of one (m, n) link over a fixed subcarrier list.
struct TrackState {
  int m = 0;
  int n = 0;
  std::vector<int> subcarriers;
  std::vector<cplx> base_coeff;  // C at base_time_s per subcarrier
  std::vector<cplx> last_pilot;  // UL pilot at current_time_s
  std::vector<cplx> last_recon;  // predicted OTA channel at current_time_s (may be empty)
  std::vector<double> phi_hat;   // accumulated phase, rad
  std::vector<std::uint8_t> tracked;
  double base_time_s = 0.0;
  double current_time_s = 0.0;
  bool aliasing = false;
  int steps = 0;
};

struct TrackResult {
  std::vector<cplx> coeff;  // C at the new symbol per subcarrier
  bool aliasing = false;    // some increment magnitude reached pi - margin
  bool fallback = false;    // sensing-assisted step ran without a reconstruction
};

TrackState start_track(int m, int n, std::vector<int> subcarriers, std::vector<cplx> base_coeff,
                       std::vector<cplx> pilot, double time_s, std::vector<cplx> recon = {});

/// phi += angle(G(t'') / G(t')); C(t'') = C(t_base) exp(j 2 phi). Pilots below 1e-12 in
/// magnitude leave the entry untracked and carried forward.
TrackResult track_quasi_static(TrackState& state, const std::vector<cplx>& pilot, double time_s,
                               const TrackOptions& options = {});

/// As track_quasi_static with the reconstructed OTA phase angle(R(t'') / R(t')) removed.
/// An empty recon (or a state without one) falls back to quasi-static and sets the flag.
TrackResult track_sensing_assisted(TrackState& state, const std::vector<cplx>& pilot, const std::vector<cplx>& recon,
                                   double time_s, const TrackOptions& options = {});

/// Per-TRP phase factor of c_bs between the base time and the current time, from the
/// tracked links of user set n (states indexed [n][m]): mean over n, k of
/// exp(-j 2 (phi(m, n, k) - phi(ref, n, k))).
std::vector<cplx> bs_phase_update(const std::vector<std::vector<TrackState>>& states, int reference_port);

/// Columns step,m,n,phi_hat_rad,phase_err_vs_truth_rad.
struct TraceRow {
  int step = 0;
  int m = 0;
  int n = 0;
  double phi_hat_rad = 0.0;
  double phase_err_rad = 0.0;
};
void write_track_csv(const std::vector<TraceRow>& rows, std::ostream& out);

}  // namespace simcal
