#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "simcal/channel.hpp"
#include "simcal/pilot.hpp"
#include "simcal/rng.hpp"
#include "simcal/sensing.hpp"
#include "test_support.hpp"

using namespace simcal;

namespace {

constexpr double kFc = 26e9;
constexpr double kDf = 120e3;
constexpr double kT = 0.625e-3;

ChannelMeta srs_meta(int n, int stride, int k_count, int l_count) {
  ChannelMeta meta;
  meta.subcarrier_spacing_hz = kDf;
  meta.carrier_freq_hz = kFc;
  meta.subcarriers = srs_comb(n, stride, k_count);
  for (int l = 0; l < l_count; ++l) meta.times_s.push_back(l * kT);
  return meta;
}

LinkGrid single_path(const ChannelMeta& meta, cplx alpha, double d, double v) {
  return predict_channel({SensedPath{alpha, d, v, 0.0}}, meta);
}

}  // namespace

TEST_SUITE("sensing") {
  TEST_CASE("unambiguous velocity and range") {
    CHECK(unambiguous_velocity(kFc, kT) == doctest::Approx(9.2244).epsilon(1e-4));
    CHECK(unambiguous_range(8 * kDf) == doctest::Approx(kSpeedOfLight / 960e3));
  }

  TEST_CASE("recovered OTA differs from the truth by one constant per link") {
    NodeImpairment ue{std::polar(1.1, 0.4), std::polar(0.9, -1.3), 4e-9, 17e-9};
    NodeImpairment trp{std::polar(1.05, 2.0), std::polar(0.95, 0.3), -3e-9, -6e-9};
    const ImpairmentMap imp{{trp}, {ue}};
    const ChannelMeta meta = srs_meta(0, 8, 16, 8);
    LinkPathSet link{0, 0, {Path{{0.7, 0.2}, 41.0, 2.0}, Path{{0.1, 0.0}, 90.0, -1.0}}};
    const ChannelTensor ota = generate_ota({link}, 1, 1, meta);
    const ChannelTensor ul = apply_impairments(ota, imp, Direction::ul);

    const double t_ref = 0.004;
    CalibrationSet cal;
    cal.num_trp = 1;
    cal.num_ue = 1;
    cal.subcarrier_spacing_hz = kDf;
    cal.carrier_freq_hz = kFc;
    cal.ref_time_s = t_ref;
    cal.c_bs = {1.0};
    cal.c_ue = {true_coefficient(imp, 0, 0, 0, t_ref, kDf, kFc)};
    cal.c_link = cal.c_ue;
    cal.has_tau = true;
    cal.tau_link = {ue.tau_s - trp.tau_s};
    cal.tau_bs = {0.0};
    cal.tau_ue = cal.tau_link;
    cal.has_e = true;
    cal.e_link = {ue.e - trp.e};
    cal.e_bs = {0.0};
    cal.e_ue = cal.e_link;

    const ChannelTensor rec = recover_ota(ul, cal);
    const cplx ratio0 = rec.values()[0] / ota.values()[0];
    for (std::size_t i = 0; i < rec.values().size(); ++i) {
      CHECK(std::abs(rec.values()[i] / ota.values()[i] - ratio0) < 1e-9);
    }
    cal.has_e = false;
    CHECK_THROWS_AS(recover_ota(ul, cal), EstimationError);
  }

  TEST_CASE("an on-bin path lands in the expected range-Doppler cell") {
    const ChannelMeta meta = srs_meta(0, 8, 64, 32);
    const RangeDopplerMap probe = range_doppler(single_path(meta, {1.0, 0.0}, 0.0, 0.0));
    const double d = 7 * probe.range_bin_m;
    const double v = 3 * probe.velocity_bin_mps;
    const RangeDopplerMap map = range_doppler(single_path(meta, {0.0, 2.0}, d, v));
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(map.power.begin(), map.power.end()) - map.power.begin());
    CHECK(best / map.num_doppler == 7);
    CHECK(best % map.num_doppler == map.zero_doppler_index + 3);
    CHECK(std::abs(map.cells[best]) == doctest::Approx(2.0));
    CHECK(map.range_bin_m == doctest::Approx(kSpeedOfLight / (64 * 8 * kDf)));
    CHECK(map.velocity_bin_mps == doctest::Approx(kSpeedOfLight / (kFc * 32 * kT)));
    CHECK(map.velocity_axis_mps[map.zero_doppler_index] == 0.0);
  }

  TEST_CASE("CFAR false-alarm rate on exponential noise") {
    const std::size_t rows = 1000;
    const std::size_t cols = 1000;
    Rng rng(11, Stream::monte_carlo);
    std::vector<double> p(rows * cols);
    for (double& x : p) x = -std::log(1.0 - rng.uniform01());
    const RangeDopplerMap map = RangeDopplerMap::from_power(rows, cols, std::move(p));
    const CfarOptions opt{1e-3, 2, 8};
    const std::vector<double> thr = cfar_threshold(map, opt);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < thr.size(); ++i) hits += map.power[i] > thr[i] ? 1 : 0;
    const double rate = static_cast<double>(hits) / static_cast<double>(rows * cols);
    CHECK(rate >= 0.3e-3);
    CHECK(rate <= 3e-3);
  }

  TEST_CASE("CFAR reports a lone cell exactly once") {
    std::vector<double> p(64 * 64, 0.0);
    p[10 * 64 + 20] = 5.0;
    const RangeDopplerMap map = RangeDopplerMap::from_power(64, 64, p);
    const std::vector<Detection> d = cfar_detect(map);
    REQUIRE(d.size() == 1);
    CHECK(d[0].range_bin == 10);
    CHECK(d[0].doppler_bin == 20);
  }

  TEST_CASE("CFAR parameters are validated") {
    const RangeDopplerMap map = RangeDopplerMap::from_power(8, 8, std::vector<double>(64, 1.0));
    CHECK_THROWS_AS(cfar_threshold(map, {1e-3, 2, 8}), ValidationError);
    CHECK_THROWS_AS(cfar_threshold(map, {0.0, 0, 1}), ValidationError);
    CHECK(cfar_scale(0, 1, 1e-3) == doctest::Approx(8.0 * (std::pow(1e-3, -1.0 / 8.0) - 1.0)));
  }

  TEST_CASE("MTI removes static returns and is linear") {
    const ChannelMeta meta = srs_meta(0, 8, 16, 16);
    const LinkGrid still = single_path(meta, {1.0, 0.5}, 30.0, 0.0);
    const LinkGrid moving = single_path(meta, {0.3, 0.0}, 60.0, 2.0);
    for (MtiMode mode : {MtiMode::mean_subtraction, MtiMode::two_pulse}) {
      const LinkGrid out = mti_filter(still, mode);
      for (const cplx& x : out.values) CHECK(std::abs(x) < 1e-12);
      LinkGrid sum = still;
      for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] = 2.0 * still.values[i] + moving.values[i];
      const LinkGrid a = mti_filter(sum, mode);
      const LinkGrid b = mti_filter(moving, mode);
      for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-12);
    }
    const LinkGrid tp = mti_filter(moving, MtiMode::two_pulse);
    CHECK(tp.at(3, 0) == cplx{});
    CHECK(std::abs(tp.at(3, 1) - (moving.at(3, 1) - moving.at(3, 0))) < 1e-15);
  }

  TEST_CASE("STFT finds a 550 Hz offset") {
    std::vector<cplx> row;
    for (int l = 0; l < 256; ++l) row.push_back(expj(kTwoPi * 550.0 * l * kT));
    const std::vector<StftFrame> frames = stft_offset(row, kT, 64, 32);
    REQUIRE(frames.size() == 7);
    for (const StftFrame& f : frames) {
      CHECK(f.freq_hz == doctest::Approx(550.0).epsilon(1e-3));
      CHECK(f.bin_hz == doctest::Approx(25.0));
    }
    CHECK_THROWS_AS(stft_offset(row, kT, 512, 1), ValidationError);
  }

  TEST_CASE("STFT keeps frequencies near the band edge inside the band") {
    std::vector<cplx> row;
    for (int l = 0; l < 64; ++l) row.push_back(expj(kTwoPi * 790.0 * l * kT));
    for (const StftFrame& f : stft_offset(row, kT, 64, 64)) {
      CHECK(f.freq_hz >= -800.0);
      CHECK(f.freq_hz < 800.0);
      CHECK(std::abs(f.freq_hz - 790.0) < 15.0);
    }
  }

  TEST_CASE("predicted channel reproduces the multipath model") {
    const ChannelMeta meta = srs_meta(2, 8, 8, 4);
    const std::vector<SensedPath> paths{{{1.0, 0.0}, 40.0, 1.0, 0.0}, {{0.0, 0.2}, 75.0, -2.0, 0.0}};
    const LinkGrid g = predict_channel(paths, meta);
    LinkPathSet link{0, 0, {Path{{1.0, 0.0}, 40.0, 1.0}, Path{{0.0, 0.2}, 75.0, -2.0}}};
    for (std::size_t k = 0; k < meta.num_k(); ++k) {
      for (std::size_t l = 0; l < meta.num_t(); ++l) {
        CHECK(std::abs(g.at(k, l) - ota_sample(link, meta.subcarriers[k], meta.times_s[l], kDf, kFc)) < 1e-14);
      }
    }
    CHECK_THROWS_AS(predict_channel({}, meta), ValidationError);
  }

  TEST_CASE("single-path estimate recovers off-bin distance and speed") {
    const ChannelMeta meta = srs_meta(0, 8, 64, 64);
    const cplx alpha = std::polar(0.8, 0.9);
    const LinkGrid g = single_path(meta, alpha, 123.45, -2.71);
    const std::vector<SensedPath> est = estimate_paths(g);
    REQUIRE(est.size() == 1);
    CHECK(est[0].d_hat_m == doctest::Approx(123.45).epsilon(1e-6));
    CHECK(est[0].v_hat_mps == doctest::Approx(-2.71).epsilon(1e-6));
    CHECK(std::abs(est[0].alpha_hat - alpha) < 1e-5);
    const LinkGrid again = predict_channel(est, meta);
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(std::abs(again.values[i] - g.values[i]) < 1e-4);
  }

  TEST_CASE("bounds match the reference and the unit-SNR closed form") {
    const auto& ref = test::frozen()["crlb_table1_rho100"];
    const CrlbReport r = crlb(100.0, 256, 64, kDf, kT, kFc);
    CHECK(r.d_crlb_m2 == doctest::Approx(ref["d_crlb_m2"].get<double>()).epsilon(1e-12));
    CHECK(r.v_crlb == doctest::Approx(ref["v_crlb"].get<double>()).epsilon(1e-12));
    CHECK(r.theta_d == doctest::Approx(ref["theta_d"].get<double>()).epsilon(1e-12));
    CHECK(r.theta_v == doctest::Approx(ref["theta_v"].get<double>()).epsilon(1e-12));
    const CrlbReport small = crlb(1.0, 2, 2, kDf, kT, kFc);
    CHECK(small.theta_total == doctest::Approx(4.0));
    CHECK_THROWS_AS(crlb(0.0, 2, 2, kDf, kT, kFc), ValidationError);
    CHECK_THROWS_AS(crlb(1.0, 1, 2, kDf, kT, kFc), ValidationError);
  }

  TEST_CASE("exact ranges localise exactly") {
    const std::vector<Vec3> anchors{{-100, -100, 0}, {100, -100, 0}, {100, 100, 0}, {-100, 100, 0}};
    const Vec3 truth{12.3, -7.8, 0.0};
    std::vector<double> ranges;
    for (const Vec3& a : anchors) ranges.push_back(std::hypot(truth[0] - a[0], truth[1] - a[1]));
    const LocalizationResult r = localize(anchors, ranges);
    CHECK(r.converged);
    CHECK(r.position[0] == doctest::Approx(12.3).epsilon(1e-9));
    CHECK(r.position[1] == doctest::Approx(-7.8).epsilon(1e-9));
    CHECK(r.residual_rms_m < 1e-9);
  }

  TEST_CASE("biased ranges land on the grid-search minimiser") {
    const auto& ref = test::frozen()["localization_grid"];
    std::vector<Vec3> anchors;
    for (const auto& a : ref["anchors"]) anchors.push_back({a[0].get<double>(), a[1].get<double>(), 0.0});
    const std::vector<double> ranges = ref["ranges"].get<std::vector<double>>();
    const LocalizationResult r = localize(anchors, ranges);
    const double step = ref["grid_step"].get<double>();
    CHECK(std::abs(r.position[0] - ref["grid_x"].get<double>()) <= step);
    CHECK(std::abs(r.position[1] - ref["grid_y"].get<double>()) <= step);
  }

  TEST_CASE("collinear anchors are rejected") {
    const std::vector<Vec3> anchors{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    CHECK_THROWS_AS(localize(anchors, {1.0, 1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(localize({{0, 0, 0}, {1, 0, 0}}, {1.0, 1.0}), ValidationError);
  }

  TEST_CASE("range-Doppler CSV has one row per cell") {
    const RangeDopplerMap map = RangeDopplerMap::from_power(2, 3, std::vector<double>(6, 1.0));
    std::ostringstream out;
    write_range_doppler_csv(map, out);
    const std::string s = out.str();
    CHECK(s.rfind("range_m,velocity_mps,power_db\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 7);
  }
}
