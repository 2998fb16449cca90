#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "simcal/channel.hpp"
#include "simcal/rng.hpp"
#include "simcal/scenario.hpp"
#include "test_support.hpp"

using namespace simcal;

namespace {

constexpr double kFc = 26e9;
constexpr double kDf = 120e3;
constexpr double kT = 0.625e-3;

ImpairmentMap random_impairments(const ScenarioConfig& cfg, std::uint64_t drop) { return draw_impairments(cfg, drop); }

}  // namespace

TEST_SUITE("channel") {
  TEST_CASE("single unit path at zero distance and speed is one everywhere") {
    LinkPathSet link{0, 0, {Path{{1.0, 0.0}, 0.0, 0.0}}};
    for (int k : {0, 5, 100}) {
      for (double t : {0.0, 0.01, 1.0}) {
        const cplx h = ota_sample(link, k, t, kDf, kFc);
        CHECK(std::abs(h - cplx{1.0, 0.0}) < 1e-15);
      }
    }
  }

  TEST_CASE("two-path sample matches the reference value") {
    const auto& ref = test::frozen()["ota_two_path"];
    LinkPathSet link{0, 0, {Path{{1.0, 0.0}, 30.0, 0.0}, Path{{0.0, 0.5}, 45.0, 3.0}}};
    const int k = ref["k"];
    const int l = ref["l"];
    const cplx h = ota_sample(link, k, l * kT, kDf, kFc);
    CHECK(h.real() == doctest::Approx(ref["re"].get<double>()).epsilon(1e-12));
    CHECK(h.imag() == doctest::Approx(ref["im"].get<double>()).epsilon(1e-12));
  }

  TEST_CASE("a 30 ppb UE offset rotates the UL sample by the reference phase after one symbol") {
    NodeImpairment ue;
    ue.e = 30e-9;
    const NodeImpairment trp;
    const cplx f0 = impairment_factor(ue, trp, 0, 0.0, kDf, kFc);
    const cplx f1 = impairment_factor(ue, trp, 0, kT, kDf, kFc);
    const double expected = test::frozen()["ul_phase_30ppb_rad"].get<double>();
    CHECK(std::abs(wrap_phase(std::arg(f1 / f0) - expected)) < 1e-9);
  }

  TEST_CASE("per-subcarrier noise power") {
    const ScenarioConfig cfg = table1_scenario();
    CHECK(noise_power_dbm(cfg) == doctest::Approx(test::frozen()["noise_power_dbm"].get<double>()).epsilon(1e-12));
    ScenarioConfig quiet = cfg;
    quiet.noiseless = true;
    CHECK(noise_variance(quiet) == 0.0);
    CHECK(noise_variance(cfg) > 0.0);
  }

  TEST_CASE("UL / DL ratio equals the node-factor quotient and is independent of the OTA channel") {
    const ScenarioConfig cfg = table1_scenario();
    const ImpairmentMap imp = random_impairments(cfg, 4);
    const DropGeometry geo = draw_geometry(cfg, 4);
    const std::vector<LinkPathSet> paths = build_paths(cfg, geo);
    const ChannelMeta meta = ChannelMeta::grid(cfg, {0, 3, 17, 255}, {0.0, 0.011, 0.04});
    const ChannelTensor ota = generate_ota(paths, cfg.num_trp, cfg.num_ue, meta);
    const ChannelTensor ul = apply_impairments(ota, imp, Direction::ul);
    const ChannelTensor dl = apply_impairments(ota, imp, Direction::dl);
    CHECK(ul.all_finite());
    for (int m = 0; m < cfg.num_trp; ++m) {
      for (int n = 0; n < cfg.num_ue; ++n) {
        for (std::size_t ki = 0; ki < meta.num_k(); ++ki) {
          for (std::size_t li = 0; li < meta.num_t(); ++li) {
            const int k = meta.subcarriers[ki];
            const double t = meta.times_s[li];
            const cplx ratio = ul.at(m, n, ki, li) / dl.at(m, n, ki, li);
            const cplx c = true_coefficient(imp, m, n, k, t, kDf, kFc);
            const cplx q = node_factor(imp.ue[n], k, t, kDf, kFc) / node_factor(imp.trp[m], k, t, kDf, kFc);
            CHECK(std::abs(ratio / c - 1.0) < 1e-9);
            CHECK(std::abs(q / c - 1.0) < 1e-12);
          }
        }
      }
    }
  }

  TEST_CASE("zero impairments leave the channel reciprocal") {
    const ScenarioConfig cfg = test::ideal_scenario();
    const ImpairmentMap imp = draw_impairments(cfg);
    const std::vector<LinkPathSet> paths = build_paths(cfg, draw_geometry(cfg));
    const ChannelMeta meta = ChannelMeta::grid(cfg, {1, 2}, {0.0, 0.5});
    const ChannelTensor ota = generate_ota(paths, cfg.num_trp, cfg.num_ue, meta);
    const ChannelTensor ul = apply_impairments(ota, imp, Direction::ul);
    const ChannelTensor dl = apply_impairments(ota, imp, Direction::dl);
    for (std::size_t i = 0; i < ota.values().size(); ++i) {
      CHECK(std::abs(ul.values()[i] - ota.values()[i]) < 1e-15);
      CHECK(std::abs(dl.values()[i] - ota.values()[i]) < 1e-15);
    }
  }

  TEST_CASE("the coefficient phase is linear in k and t") {
    NodeImpairment ue{{1.0, 0.0}, {1.0, 0.0}, 3e-9, 12e-9};
    NodeImpairment trp{{1.0, 0.0}, {1.0, 0.0}, -2e-9, -5e-9};
    ImpairmentMap imp{{trp}, {ue}};
    const double slope_k = std::arg(true_coefficient(imp, 0, 0, 1, 0.0, kDf, kFc));
    const double expected_k = -4.0 * kPi * kDf * (3e-9 - -2e-9);
    CHECK(std::abs(wrap_phase(slope_k - expected_k)) < 1e-12);
    const double dt = 1e-4;
    const double slope_t = std::arg(true_coefficient(imp, 0, 0, 0, dt, kDf, kFc));
    const double expected_t = 4.0 * kPi * (12e-9 - -5e-9) * kFc * dt;
    CHECK(std::abs(wrap_phase(slope_t - expected_t)) < 1e-12);
  }

  TEST_CASE("Doppler phase grows linearly with slow time") {
    const double v = 2.5;
    LinkPathSet link{0, 0, {Path{{1.0, 0.0}, 10.0, v}}};
    const double rate = kTwoPi * v / kSpeedOfLight * kFc;
    const cplx h0 = ota_sample(link, 4, 0.0, kDf, kFc);
    for (int l = 1; l < 8; ++l) {
      const cplx hl = ota_sample(link, 4, l * kT, kDf, kFc);
      CHECK(std::abs(wrap_phase(std::arg(hl / h0) - rate * l * kT)) < 1e-9);
      CHECK(std::abs(hl) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("free-space LOS gain follows lambda / (4 pi d)") {
    ScenarioConfig cfg = test::ideal_scenario();
    cfg.num_trp = 1;
    cfg.num_ue = 1;
    cfg.num_calib_ue = 1;
    cfg.geometry.trp_positions_m = {{0.0, 0.0, 0.0}};
    cfg.geometry.ue_positions_m = {{30.0, 40.0, 0.0}};
    cfg.geometry.ue_velocities_mps = {{0.0, 0.0, 0.0}};
    const std::vector<LinkPathSet> paths = build_paths(cfg, draw_geometry(cfg));
    REQUIRE(paths.size() == 1);
    REQUIRE(paths[0].paths.size() == 1);
    const Path& p = paths[0].paths[0];
    CHECK(p.d_m == doctest::Approx(50.0));
    CHECK(std::abs(p.alpha) == doctest::Approx(cfg.wavelength_m() / (4.0 * kPi * 50.0)));
    CHECK(p.v_mps == doctest::Approx(0.0));
  }

  TEST_CASE("noise is deterministic for a fixed stream and has the configured variance") {
    const ScenarioConfig cfg = test::ideal_scenario();
    const ChannelMeta meta = ChannelMeta::grid(cfg, {0, 1, 2, 3}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0});
    ChannelTensor zero(Direction::ul, cfg.num_trp, cfg.num_ue, meta);
    Rng a(3, Stream::noise, 1);
    Rng b(3, Stream::noise, 1);
    const ChannelTensor na = add_noise(zero, 0.5, a);
    const ChannelTensor nb = add_noise(zero, 0.5, b);
    double power = 0.0;
    for (std::size_t i = 0; i < na.values().size(); ++i) {
      CHECK(na.values()[i] == nb.values()[i]);
      power += std::norm(na.values()[i]);
    }
    CHECK(power / na.values().size() == doctest::Approx(0.5).epsilon(0.1));
    Rng c(3, Stream::noise, 1);
    const ChannelTensor same = add_noise(zero, 0.0, c);
    for (const cplx& x : same.values()) CHECK(x == cplx{});
  }

  TEST_CASE("channel CSV has one header line and one row per sample") {
    const ScenarioConfig cfg = test::ideal_scenario();
    const ChannelMeta meta = ChannelMeta::grid(cfg, {0, 1}, {0.0});
    ChannelTensor ch(Direction::dl, 2, 1, meta);
    std::ostringstream out;
    write_channel_csv(ch, out);
    const std::string text = out.str();
    CHECK(text.rfind("m,n,k,l,re,im,direction\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4);
  }
}
