#include <cmath>
#include <set>

#include "doctest.h"
#include "simcal/rng.hpp"
#include "simcal/scenario.hpp"
#include "test_support.hpp"

using namespace simcal;

TEST_SUITE("scenario") {
  TEST_CASE("bundled deployment document loads with SI units") {
    const ScenarioConfig cfg = load_scenario_file(test::config_path("table1.json"));
    CHECK(cfg.carrier_freq_hz == doctest::Approx(26e9));
    CHECK(cfg.subcarrier_spacing_hz == doctest::Approx(120e3));
    CHECK(cfg.symbol_interval_s == doctest::Approx(0.625e-3));
    CHECK(cfg.num_trp == 8);
    CHECK(cfg.num_ue == 8);
    CHECK(cfg.num_calib_ue == 4);
    CHECK(cfg.num_subcarriers == 256);
    CHECK(cfg.tau_s.lo == doctest::Approx(-10e-9));
    CHECK(cfg.tau_s.hi == doctest::Approx(10e-9));
    CHECK(cfg.e.lo == doctest::Approx(-30e-9));
    CHECK(cfg.e.hi == doctest::Approx(30e-9));
    CHECK(cfg.drops == 200);
  }

  TEST_CASE("K defaults to one TRP comb of the FFT") {
    const ScenarioConfig cfg = load_scenario(R"({"system": {"fft_size": 2048}})");
    CHECK(cfg.num_subcarriers == 2048 / cfg.num_trp);
  }

  TEST_CASE("K = 0 is rejected") {
    CHECK_THROWS_AS(load_scenario(R"({"system": {"num_subcarriers": 0}})"), ValidationError);
  }

  TEST_CASE("K larger than the FFT is rejected") {
    CHECK_THROWS_AS(load_scenario(R"({"system": {"num_subcarriers": 4096}})"), ValidationError);
  }

  TEST_CASE("unknown keys report their field path") {
    try {
      load_scenario(R"({"system": {"carrier_freq": 26e9}})");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.path() == "system.carrier_freq");
    }
    try {
      load_scenario(R"({"geometry": {"ue_region": {"radius": 3}}})");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.path() == "geometry.ue_region.radius");
    }
  }

  TEST_CASE("malformed bounds and types are schema errors") {
    CHECK_THROWS_AS(load_scenario(R"({"impairments": {"tau_bounds_ns": [1]}})"), ConfigError);
    CHECK_THROWS_AS(load_scenario(R"({"impairments": {"tau_bounds_ns": [5, -5]}})"), ConfigError);
    CHECK_THROWS_AS(load_scenario(R"({"system": {"fft_size": "big"}})"), ConfigError);
    CHECK_THROWS_AS(load_scenario("{not json"), ConfigError);
  }

  TEST_CASE("calibration UE count must not exceed N") {
    CHECK_THROWS_AS(load_scenario(R"({"geometry": {"num_ue": 2, "num_calib_ue": 3}})"), ValidationError);
  }

  TEST_CASE("omitted seed defaults to zero and draws repeat") {
    const ScenarioConfig a = load_scenario("{}");
    const ScenarioConfig b = load_scenario("{}");
    CHECK(a.seed == 0);
    const ImpairmentMap ia = draw_impairments(a);
    const ImpairmentMap ib = draw_impairments(b);
    REQUIRE(ia.trp.size() == ib.trp.size());
    for (std::size_t i = 0; i < ia.trp.size(); ++i) {
      CHECK(ia.trp[i].beta_t == ib.trp[i].beta_t);
      CHECK(ia.trp[i].tau_s == ib.trp[i].tau_s);
      CHECK(ia.trp[i].e == ib.trp[i].e);
    }
  }

  TEST_CASE("degenerate distributions give ideal nodes") {
    ScenarioConfig cfg = test::ideal_scenario();
    const ImpairmentMap imp = draw_impairments(cfg, 3);
    for (const auto* list : {&imp.trp, &imp.ue}) {
      for (const NodeImpairment& node : *list) {
        CHECK(node.beta_t == cplx{1.0, 0.0});
        CHECK(node.beta_r == cplx{1.0, 0.0});
        CHECK(node.tau_s == 0.0);
        CHECK(node.e == 0.0);
      }
    }
  }

  TEST_CASE("drawn offsets respect the configured bounds") {
    const ScenarioConfig cfg = table1_scenario();
    for (std::uint64_t drop = 0; drop < 50; ++drop) {
      const ImpairmentMap imp = draw_impairments(cfg, drop);
      CHECK(imp.trp.size() == 8);
      CHECK(imp.ue.size() == 8);
      for (const auto* list : {&imp.trp, &imp.ue}) {
        for (const NodeImpairment& node : *list) {
          CHECK(cfg.tau_s.contains(node.tau_s));
          CHECK(cfg.e.contains(node.e));
          CHECK(std::abs(node.beta_t) >= cfg.rf_amp_min);
          CHECK(std::abs(node.beta_r) > 0.0);
        }
      }
    }
  }

  TEST_CASE("drops are independent streams, equal drops repeat") {
    const ScenarioConfig cfg = table1_scenario();
    const ImpairmentMap a = draw_impairments(cfg, 7);
    const ImpairmentMap b = draw_impairments(cfg, 7);
    const ImpairmentMap c = draw_impairments(cfg, 8);
    CHECK(a.ue[0].tau_s == b.ue[0].tau_s);
    CHECK(a.ue[0].tau_s != c.ue[0].tau_s);
  }

  TEST_CASE("geometry draws stay inside the UE region with bounded speed") {
    const ScenarioConfig cfg = table1_scenario();
    const DropGeometry geo = draw_geometry(cfg, 11);
    REQUIRE(geo.ue_positions_m.size() == 8);
    for (std::size_t n = 0; n < geo.ue_positions_m.size(); ++n) {
      const Vec3& p = geo.ue_positions_m[n];
      CHECK(std::hypot(p[0], p[1]) <= cfg.geometry.ue_region_radius_m + 1e-9);
      const Vec3& v = geo.ue_velocities_mps[n];
      const double speed = std::hypot(v[0], v[1]);
      CHECK(speed >= 3.0 - 1e-12);
      CHECK(speed <= 4.0 + 1e-12);
    }
  }

  TEST_CASE("dump and reload preserve the resolved values") {
    const ScenarioConfig a = load_scenario_file(test::config_path("table1.json"));
    const ScenarioConfig b = load_scenario(dump_scenario(a));
    CHECK(b.tau_s.hi == doctest::Approx(a.tau_s.hi).epsilon(1e-15));
    CHECK(b.e.lo == doctest::Approx(a.e.lo).epsilon(1e-15));
    CHECK(b.pilots.cars_symbols == a.pilots.cars_symbols);
    CHECK(b.geometry.trp_positions_m == a.geometry.trp_positions_m);
    CHECK(b.drops == a.drops);
    CHECK(dump_scenario(b) == dump_scenario(a));
  }

  TEST_CASE("rng streams are reproducible and separated") {
    Rng a(5, Stream::noise, 2);
    Rng b(5, Stream::noise, 2);
    Rng c(5, Stream::geometry, 2);
    std::set<double> seen;
    for (int i = 0; i < 100; ++i) {
      const double x = a.uniform01();
      CHECK(x == b.uniform01());
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
      seen.insert(x);
    }
    CHECK(seen.size() == 100);
    CHECK(Rng(5, Stream::noise, 2).uniform01() != c.uniform01());
  }

  TEST_CASE("complex normal draws have the requested variance") {
    Rng rng(1, Stream::monte_carlo);
    double power = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) power += std::norm(rng.complex_normal(2.0));
    CHECK(power / n == doctest::Approx(2.0).epsilon(0.02));
  }
}
