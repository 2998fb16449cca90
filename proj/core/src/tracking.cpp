#include "simcal/tracking.hpp"

#include <algorithm>
#include <ostream>

#include "simcal/csv.hpp"

namespace simcal {

namespace {

constexpr double kUntracked = 1e-12;

// Replaces per-k increments by median + slope * k after fitting the k-linear part.
void robust_increments(const std::vector<int>& ks, std::vector<double>& inc, const std::vector<std::uint8_t>& ok) {
  std::vector<double> x;
  std::vector<double> y;
  cplx mean{};
  for (std::size_t i = 0; i < inc.size(); ++i) {
    if (ok[i]) mean += expj(inc[i]);
  }
  if (std::abs(mean) == 0.0) return;
  const double centre = std::arg(mean);
  for (std::size_t i = 0; i < inc.size(); ++i) {
    if (!ok[i]) continue;
    x.push_back(static_cast<double>(ks[i]));
    y.push_back(centre + wrap_phase(inc[i] - centre));
  }
  if (x.size() < 2) return;
  const double n = static_cast<double>(x.size());
  double xm = 0.0;
  double ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= n;
  ym /= n;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  const double slope = den > 0.0 ? num / den : 0.0;
  std::vector<double> residual(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) residual[i] = y[i] - slope * x[i];
  std::nth_element(residual.begin(), residual.begin() + static_cast<std::ptrdiff_t>(residual.size() / 2),
                   residual.end());
  const double median = residual[residual.size() / 2];
  for (std::size_t i = 0; i < inc.size(); ++i) {
    if (ok[i]) inc[i] = median + slope * ks[i];
  }
}

TrackResult step(TrackState& state, const std::vector<cplx>& pilot, const std::vector<cplx>* recon, double time_s,
                 const TrackOptions& options) {
  const std::size_t kk = state.subcarriers.size();
  if (pilot.size() != kk) throw ValidationError("tracking: pilot size does not match the tracked subcarriers");
  std::vector<double> inc(kk, 0.0);
  std::vector<std::uint8_t> ok(kk, 0);
  for (std::size_t i = 0; i < kk; ++i) {
    if (std::abs(pilot[i]) < kUntracked || std::abs(state.last_pilot[i]) < kUntracked) continue;
    double d = std::arg(pilot[i] / state.last_pilot[i]);
    if (recon) d = wrap_phase(d - std::arg((*recon)[i] / state.last_recon[i]));
    inc[i] = d;
    ok[i] = 1;
  }
  if (options.robust_aggregate) robust_increments(state.subcarriers, inc, ok);

  TrackResult out;
  out.coeff.resize(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    if (ok[i]) {
      if (std::abs(inc[i]) >= kPi - options.alias_margin_rad) out.aliasing = true;
      state.phi_hat[i] += inc[i];
      state.last_pilot[i] = pilot[i];
    } else {
      state.tracked[i] = 0;
    }
    out.coeff[i] = state.base_coeff[i] * expj(2.0 * state.phi_hat[i]);
  }
  if (recon) state.last_recon = *recon;
  state.aliasing = state.aliasing || out.aliasing;
  state.current_time_s = time_s;
  ++state.steps;
  return out;
}

}  // namespace

TrackState start_track(int m, int n, std::vector<int> subcarriers, std::vector<cplx> base_coeff,
                       std::vector<cplx> pilot, double time_s, std::vector<cplx> recon) {
  const std::size_t kk = subcarriers.size();
  if (base_coeff.size() != kk || pilot.size() != kk || (!recon.empty() && recon.size() != kk)) {
    throw ValidationError("start_track: inconsistent sizes");
  }
  TrackState s;
  s.m = m;
  s.n = n;
  s.subcarriers = std::move(subcarriers);
  s.base_coeff = std::move(base_coeff);
  s.last_pilot = std::move(pilot);
  s.last_recon = std::move(recon);
  s.phi_hat.assign(kk, 0.0);
  s.tracked.assign(kk, 1);
  s.base_time_s = time_s;
  s.current_time_s = time_s;
  return s;
}

TrackResult track_quasi_static(TrackState& state, const std::vector<cplx>& pilot, double time_s,
                               const TrackOptions& options) {
  return step(state, pilot, nullptr, time_s, options);
}

TrackResult track_sensing_assisted(TrackState& state, const std::vector<cplx>& pilot, const std::vector<cplx>& recon,
                                   double time_s, const TrackOptions& options) {
  if (recon.empty() || state.last_recon.empty()) {
    TrackResult out = step(state, pilot, nullptr, time_s, options);
    if (!recon.empty()) state.last_recon = recon;
    out.fallback = true;
    return out;
  }
  if (recon.size() != state.subcarriers.size()) throw ValidationError("tracking: reconstruction size mismatch");
  return step(state, pilot, &recon, time_s, options);
}

std::vector<cplx> bs_phase_update(const std::vector<std::vector<TrackState>>& states, int reference_port) {
  if (states.empty()) return {};
  const std::size_t num_trp = states.front().size();
  if (reference_port < 0 || static_cast<std::size_t>(reference_port) >= num_trp) {
    throw ValidationError("bs_phase_update: reference port out of range");
  }
  std::vector<cplx> out(num_trp, cplx{});
  for (std::size_t m = 0; m < num_trp; ++m) {
    cplx acc{};
    for (const auto& per_ue : states) {
      const TrackState& s = per_ue[m];
      const TrackState& r = per_ue[static_cast<std::size_t>(reference_port)];
      for (std::size_t i = 0; i < s.phi_hat.size(); ++i) {
        if (s.tracked[i] && r.tracked[i]) acc += expj(-2.0 * (s.phi_hat[i] - r.phi_hat[i]));
      }
    }
    out[m] = std::abs(acc) > 0.0 ? acc / std::abs(acc) : cplx{1.0, 0.0};
  }
  return out;
}

void write_track_csv(const std::vector<TraceRow>& rows, std::ostream& out) {
  CsvWriter csv(out, {"step", "m", "n", "phi_hat_rad", "phase_err_vs_truth_rad"});
  for (const TraceRow& r : rows) csv.row(r.step, r.m, r.n, r.phi_hat_rad, r.phase_err_rad);
}

}  // namespace simcal
