#include <cmath>
#include <sstream>

#include "doctest.h"
#include "simcal/tracking.hpp"

using namespace simcal;

namespace {

constexpr double kFc = 26e9;
constexpr double kT = 0.625e-3;
const std::vector<int> kKs{64, 192, 320, 448};

// UL pilot of a single static path with UE offset e and radial speed v.
std::vector<cplx> ul_pilot(double t, double e, double v) {
  std::vector<cplx> out;
  for (int k : kKs) {
    const double doppler = kTwoPi * v / kSpeedOfLight * kFc * t;
    out.push_back(expj(0.3 + 0.001 * k) * expj(doppler) * expj(kTwoPi * e * kFc * t));
  }
  return out;
}

std::vector<cplx> ota(double t, double v) {
  std::vector<cplx> out;
  for (int k : kKs) out.push_back(expj(0.3 + 0.001 * k) * expj(kTwoPi * v / kSpeedOfLight * kFc * t));
  return out;
}

std::vector<cplx> true_c(double t, double e) {
  std::vector<cplx> out;
  for (std::size_t i = 0; i < kKs.size(); ++i) out.push_back(expj(0.7 * i) * expj(2.0 * kTwoPi * e * kFc * t));
  return out;
}

double max_phase_error(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(std::arg(a[i] / b[i])));
  return worst;
}

}  // namespace

TEST_SUITE("tracking") {
  TEST_CASE("a 20 ppb offset on a static channel is followed exactly") {
    const double e = 20e-9;
    TrackState s = start_track(0, 0, kKs, true_c(0.0, e), ul_pilot(0.0, e, 0.0), 0.0);
    for (int l = 1; l <= 60; ++l) {
      const double t = l * kT;
      const TrackResult r = track_quasi_static(s, ul_pilot(t, e, 0.0), t);
      CHECK(max_phase_error(r.coeff, true_c(t, e)) < 1e-6);
      CHECK_FALSE(r.aliasing);
    }
    CHECK(s.steps == 60);
    CHECK(s.current_time_s == doctest::Approx(60 * kT));
  }

  TEST_CASE("quasi-static tracking absorbs twice the Doppler phase") {
    const double v = 3.0;
    TrackState s = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, v), 0.0);
    TrackResult r;
    const int steps = 10;
    for (int l = 1; l <= steps; ++l) r = track_quasi_static(s, ul_pilot(l * kT, 0.0, v), l * kT);
    const double expected = 2.0 * kTwoPi * v / kSpeedOfLight * kFc * steps * kT;
    for (std::size_t i = 0; i < kKs.size(); ++i) {
      CHECK(std::abs(wrap_phase(std::arg(r.coeff[i] / true_c(steps * kT, 0.0)[i]) - expected)) < 1e-9);
    }
  }

  TEST_CASE("a perfect reconstruction removes the Doppler phase") {
    const double v = 3.5;
    const double e = -12e-9;
    TrackState s = start_track(0, 0, kKs, true_c(0.0, e), ul_pilot(0.0, e, v), 0.0, ota(0.0, v));
    for (int l = 1; l <= 60; ++l) {
      const double t = l * kT;
      const TrackResult r = track_sensing_assisted(s, ul_pilot(t, e, v), ota(t, v), t);
      CHECK_FALSE(r.fallback);
      CHECK(max_phase_error(r.coeff, true_c(t, e)) < 1e-9);
    }
  }

  TEST_CASE("a velocity error in the reconstruction propagates linearly") {
    const double v = 3.5;
    const double dv = 0.01;
    TrackState s = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, v), 0.0, ota(0.0, v + dv));
    TrackResult r;
    const int steps = 30;
    for (int l = 1; l <= steps; ++l) r = track_sensing_assisted(s, ul_pilot(l * kT, 0.0, v), ota(l * kT, v + dv), l * kT);
    const double expected = -2.0 * kTwoPi * dv / kSpeedOfLight * kFc * steps * kT;
    const std::vector<cplx> truth = true_c(steps * kT, 0.0);
    for (std::size_t i = 0; i < kKs.size(); ++i) {
      CHECK(std::arg(r.coeff[i] / truth[i]) == doctest::Approx(expected).epsilon(1e-9));
    }
  }

  TEST_CASE("missing reconstruction falls back to quasi-static and flags it") {
    TrackState s = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, 0.0), 0.0);
    const TrackResult r = track_sensing_assisted(s, ul_pilot(kT, 0.0, 0.0), {}, kT);
    CHECK(r.fallback);
    CHECK(max_phase_error(r.coeff, true_c(kT, 0.0)) < 1e-12);
  }

  TEST_CASE("increments near pi raise the aliasing flag") {
    // 1 / (2 fc T) gives a half-turn per symbol.
    const double e = 0.97 / (2.0 * kFc * kT);
    TrackState s = start_track(0, 0, kKs, true_c(0.0, e), ul_pilot(0.0, e, 0.0), 0.0);
    const TrackResult r = track_quasi_static(s, ul_pilot(kT, e, 0.0), kT);
    CHECK(r.aliasing);
    CHECK(s.aliasing);
    TrackState calm = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, 0.0), 0.0);
    CHECK_FALSE(track_quasi_static(calm, ul_pilot(kT, 1e-9, 0.0), kT).aliasing);
  }

  TEST_CASE("vanishing pilots leave entries untracked") {
    TrackState s = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, 0.0), 0.0);
    std::vector<cplx> pilot = ul_pilot(kT, 0.0, 0.0);
    pilot[2] = 0.0;
    const TrackResult r = track_quasi_static(s, pilot, kT);
    CHECK(s.tracked[2] == 0);
    CHECK(s.tracked[1] == 1);
    CHECK(std::abs(r.coeff[2] - true_c(0.0, 0.0)[2]) < 1e-15);
  }

  TEST_CASE("robust aggregation preserves a k-linear increment") {
    const std::vector<int> ks{0, 10, 20, 30, 40};
    std::vector<cplx> base(5, cplx{1.0, 0.0});
    std::vector<cplx> p0(5, cplx{1.0, 0.0});
    TrackState s = start_track(0, 0, ks, base, p0, 0.0);
    std::vector<cplx> p1;
    for (int k : ks) p1.push_back(expj(0.1 + 0.002 * k));
    TrackOptions opt;
    opt.robust_aggregate = true;
    track_quasi_static(s, p1, kT, opt);
    for (std::size_t i = 0; i < ks.size(); ++i) CHECK(s.phi_hat[i] == doctest::Approx(0.1 + 0.002 * ks[i]).epsilon(1e-9));
  }

  TEST_CASE("TRP phase update reproduces per-port differences") {
    // phi(m, n, k) = a_n - b_m; the update is exp(-2j (phi_m - phi_ref)) = exp(2j (b_m - b_ref)).
    const std::vector<double> b{0.2, -0.4, 0.0};
    const std::vector<double> a{1.0, -0.3};
    std::vector<std::vector<TrackState>> states(2);
    for (int n = 0; n < 2; ++n) {
      for (int m = 0; m < 3; ++m) {
        TrackState s = start_track(m, n, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, 0.0), 0.0);
        for (double& phi : s.phi_hat) phi = a[n] - b[m];
        states[n].push_back(s);
      }
    }
    const std::vector<cplx> u = bs_phase_update(states, 2);
    REQUIRE(u.size() == 3);
    for (int m = 0; m < 3; ++m) CHECK(std::abs(u[m] - expj(2.0 * (b[m] - b[2]))) < 1e-12);
    CHECK_THROWS_AS(bs_phase_update(states, 3), ValidationError);
  }

  TEST_CASE("inconsistent sizes are rejected") {
    CHECK_THROWS_AS(start_track(0, 0, kKs, {1.0}, ul_pilot(0.0, 0.0, 0.0), 0.0), ValidationError);
    TrackState s = start_track(0, 0, kKs, true_c(0.0, 0.0), ul_pilot(0.0, 0.0, 0.0), 0.0);
    CHECK_THROWS_AS(track_quasi_static(s, {1.0}, kT), ValidationError);
  }

  TEST_CASE("trace CSV header") {
    std::ostringstream out;
    write_track_csv({TraceRow{1, 0, 0, 0.5, 0.01}}, out);
    CHECK(out.str() == "step,m,n,phi_hat_rad,phase_err_vs_truth_rad\n1,0,0,0.5,0.01\n");
  }
}
