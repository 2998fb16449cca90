#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "simcal/pilot.hpp"
#include "simcal/rng.hpp"
#include "test_support.hpp"

using namespace simcal;

namespace {

CombSlice slice(std::vector<int> ks, std::vector<cplx> values) {
  CombSlice s;
  s.subcarriers = std::move(ks);
  s.values = std::move(values);
  s.valid.assign(s.subcarriers.size(), 1);
  return s;
}

}  // namespace

TEST_SUITE("pilot") {
  TEST_CASE("CARS indices of a small frame") {
    const PilotMap map = build_pilot_map(2, 2, 4);
    const auto& ref = test::frozen()["ue_indices_m2_n2_k4"];
    const std::vector<int> comb = map.ue_comb(1, 1);
    REQUIRE(comb.size() == ref.size());
    for (std::size_t i = 0; i < comb.size(); ++i) CHECK(comb[i] == ref[i].get<int>());
    CHECK(map.ue_length() == 2);
  }

  TEST_CASE("single TRP and single UE map onto consecutive subcarriers") {
    const PilotMap map = build_pilot_map(1, 1, 5);
    const std::vector<int> bs = map.bs_comb(0);
    const std::vector<int> ue = map.ue_comb(0, 0);
    std::vector<int> expected(5);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(bs == expected);
    CHECK(ue == expected);
  }

  TEST_CASE("N must divide K") {
    CHECK_THROWS_AS(build_pilot_map(2, 3, 4), ValidationError);
    CHECK_THROWS_AS(build_pilot_map(0, 1, 4), ValidationError);
    CHECK_NOTHROW(build_pilot_map(8, 4, 256));
  }

  TEST_CASE("combs are mutually orthogonal and inside the TRP comb") {
    const int m_count = 8;
    const int n_count = 4;
    const PilotMap map = build_pilot_map(m_count, n_count, 256);
    std::set<int> ue_used;
    std::set<int> bs_used;
    for (int m = 0; m < m_count; ++m) {
      const std::vector<int> bs = map.bs_comb(m);
      CHECK(bs.size() == 256);
      for (int k : bs) {
        CHECK(k % m_count == m);
        CHECK(bs_used.insert(k).second);
      }
      std::set<int> bs_set(bs.begin(), bs.end());
      for (int n = 0; n < n_count; ++n) {
        const std::vector<int> ue = map.ue_comb(m, n);
        CHECK(ue.size() == 64);
        for (int k : ue) {
          CHECK(bs_set.contains(k));
          CHECK(ue_used.insert(k).second);
        }
      }
    }
    CHECK(ue_used.size() == 256 * m_count);
  }

  TEST_CASE("SRS combs interleave users") {
    const std::vector<int> a = srs_comb(0, 8, 4);
    const std::vector<int> b = srs_comb(3, 8, 4);
    CHECK(a == std::vector<int>{0, 8, 16, 24});
    CHECK(b == std::vector<int>{3, 11, 19, 27});
  }

  TEST_CASE("least-squares estimate divides by the pilot and keeps absent entries absent") {
    CombSlice obs = slice({0, 1, 2}, {{2.0, 0.0}, {0.0, 4.0}, {9.0, 9.0}});
    obs.valid[2] = 0;
    const CombSlice est = estimate_channel(obs, {{2.0, 0.0}, {0.0, 2.0}, {1.0, 0.0}});
    CHECK(est.values[0] == cplx{1.0, 0.0});
    CHECK(std::abs(est.values[1] - cplx{2.0, 0.0}) < 1e-15);
    CHECK(est.valid[2] == 0);
    CHECK(est.valid_count() == 2);
    CHECK_THROWS_AS(estimate_channel(obs, {{1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(estimate_channel(obs, {{1.0, 0.0}}), ValidationError);
  }

  TEST_CASE("unit-modulus estimate yields its conjugate") {
    const CombSlice est = slice({0, 1}, {expj(0.3), expj(-1.2)});
    const CarsSequence cars = form_cars(est);
    CHECK(cars.rho == doctest::Approx(1.0));
    CHECK(std::abs(cars.symbols[0] - expj(-0.3)) < 1e-15);
    CHECK(std::abs(cars.symbols[1] - expj(1.2)) < 1e-15);
  }

  TEST_CASE("CARS carries unit mean power for unequal amplitudes") {
    const CombSlice est = slice({0, 1, 2, 3}, {{0.5, 0.0}, {0.0, 2.0}, {1.0, 1.0}, {3.0, -1.0}});
    const CarsSequence cars = form_cars(est);
    double power = 0.0;
    for (const cplx& s : cars.symbols) power += std::norm(s);
    CHECK(power / 4.0 == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("vanishing estimates are unusable and send nothing") {
    const CombSlice est = slice({0, 1}, {{0.0, 0.0}, {1.0, 0.0}});
    const CarsSequence cars = form_cars(est);
    CHECK(cars.usable[0] == 0);
    CHECK(cars.symbols[0] == cplx{});
    CHECK(cars.usable[1] == 1);
    const CarsSequence none = form_cars(slice({0}, {{0.0, 0.0}}));
    CHECK(none.usable[0] == 0);
  }

  TEST_CASE("noiseless round trip returns the reciprocity ratio G / H") {
    Rng rng(9, Stream::monte_carlo);
    std::vector<int> ks{0, 32, 64, 96};
    std::vector<cplx> h(4);
    std::vector<cplx> g(4);
    for (std::size_t i = 0; i < 4; ++i) {
      h[i] = rng.complex_normal(1.0);
      g[i] = rng.complex_normal(1.0);
    }
    const CarsSequence cars = form_cars(slice(ks, h));
    std::vector<cplx> echo(4);
    for (std::size_t i = 0; i < 4; ++i) echo[i] = g[i] * cars.symbols[i];
    const EquivalentChannel eq = form_equivalent_channel(slice(ks, echo), cars, 2, 1, 0.01);
    CHECK(eq.m == 2);
    CHECK(eq.n == 1);
    CHECK(eq.time_s == 0.01);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(eq.values.values[i] - g[i] / h[i]) < 1e-12);
  }

  TEST_CASE("absent echo entries stay absent in the equivalent channel") {
    const CarsSequence cars = form_cars(slice({0, 1}, {{1.0, 0.0}, {0.0, 0.0}}));
    CombSlice echo = slice({0, 1}, {{1.0, 0.0}, {1.0, 0.0}});
    const EquivalentChannel eq = form_equivalent_channel(echo, cars, 0, 0, 0.0);
    CHECK(eq.values.valid[0] == 1);
    CHECK(eq.values.valid[1] == 0);
    CHECK_THROWS_AS(form_equivalent_channel(slice({0}, {{1.0, 0.0}}), cars, 0, 0, 0.0), ValidationError);
  }

  TEST_CASE("noise on the echo is scaled by 1 / rho") {
    // Equivalent-channel noise variance equals sigma^2 / rho^2.
    std::vector<int> ks(64);
    std::iota(ks.begin(), ks.end(), 0);
    std::vector<cplx> h(64, cplx{0.5, 0.0});
    const CarsSequence cars = form_cars(slice(ks, h));
    CHECK(cars.rho == doctest::Approx(0.5));
    Rng rng(2, Stream::monte_carlo);
    const double sigma2 = 0.01;
    double acc = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
      std::vector<cplx> echo(64);
      for (int i = 0; i < 64; ++i) echo[i] = rng.complex_normal(sigma2);
      const EquivalentChannel eq = form_equivalent_channel(slice(ks, echo), cars, 0, 0, 0.0);
      for (const cplx& v : eq.values.values) acc += std::norm(v);
    }
    CHECK(acc / (trials * 64.0) == doctest::Approx(sigma2 / 0.25).epsilon(0.02));
  }
}
