#include "simcal/scene.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace simcal {

namespace {

// Demo comb stride: the SRS comb spacing of an eight-UE deployment.
constexpr int kDemoCombStride = 8;

ScenarioConfig with_static_ues(ScenarioConfig cfg) {
  cfg.geometry.ue_speed_mps = {0.0, 0.0};
  for (Vec3& v : cfg.geometry.ue_velocities_mps) v = Vec3{};
  return cfg;
}

std::vector<double> centre_times(const ScenarioConfig& cfg) {
  std::vector<double> out;
  for (double s : cfg.pilots.cars_symbols) out.push_back(s * cfg.symbol_interval_s);
  return out;
}

double effective_noise(const Drop& drop) { return drop.noise_var() > 0.0 ? drop.noise_var() : 1e-12; }

std::vector<double> symbol_times(int count, double interval_s, double offset_s = 0.0) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int l = 0; l < count; ++l) out[l] = offset_s + l * interval_s;
  return out;
}

LinkGrid observe_grid(Drop& drop, int m, int n, std::vector<int> subcarriers, std::vector<double> times) {
  LinkGrid grid;
  grid.meta = ChannelMeta::grid(drop.cfg(), std::move(subcarriers), std::move(times));
  grid.values.resize(grid.num_k() * grid.num_t());
  for (std::size_t k = 0; k < grid.num_k(); ++k) {
    for (std::size_t l = 0; l < grid.num_t(); ++l) {
      grid.at(k, l) = drop.observe(drop.ul(m, n, grid.meta.subcarriers[k], grid.meta.times_s[l]));
    }
  }
  return grid;
}

std::vector<cplx> predict_at(const std::vector<SensedPath>& paths, const ScenarioConfig& cfg,
                             const std::vector<int>& subcarriers, double t) {
  return predict_channel(paths, ChannelMeta::grid(cfg, subcarriers, {t})).values;
}

std::size_t peak_doppler_bin(const RangeDopplerMap& map) {
  const auto it = std::max_element(map.power.begin(), map.power.end());
  return static_cast<std::size_t>(it - map.power.begin()) % map.num_doppler;
}

}  // namespace

Drop::Drop(const ScenarioConfig& cfg, std::uint64_t index)
    : cfg_(cfg),
      index_(index),
      geometry_(draw_geometry(cfg, index)),
      impairments_(draw_impairments(cfg, index)),
      paths_(build_paths(cfg, geometry_)),
      noise_var_(noise_variance(cfg)),
      noise_(cfg.seed, Stream::noise, index) {}

cplx Drop::ota(int m, int n, int k, double t) const {
  return ota_sample(link(m, n), k, t, cfg_.subcarrier_spacing_hz, cfg_.carrier_freq_hz);
}

cplx Drop::ul(int m, int n, int k, double t) const {
  return ota(m, n, k, t) * impairment_factor(impairments_.ue[n], impairments_.trp[m], k, t,
                                               cfg_.subcarrier_spacing_hz, cfg_.carrier_freq_hz);
}

cplx Drop::dl(int m, int n, int k, double t) const {
  return ota(m, n, k, t) * impairment_factor(impairments_.trp[m], impairments_.ue[n], k, t,
                                               cfg_.subcarrier_spacing_hz, cfg_.carrier_freq_hz);
}

cplx Drop::true_c(int m, int n, int k, double t) const {
  return true_coefficient(impairments_, m, n, k, t, cfg_.subcarrier_spacing_hz, cfg_.carrier_freq_hz);
}

cplx Drop::true_bs(int m, int k, double t) const {
  return node_factor(impairments_.trp[m], k, t, cfg_.subcarrier_spacing_hz, cfg_.carrier_freq_hz);
}

cplx Drop::observe(cplx clean) {
  if (noise_var_ <= 0.0) return clean;
  return clean + noise_.complex_normal(noise_var_);
}

std::vector<int> eval_subcarriers(const ScenarioConfig& cfg) {
  const int count = std::max(1, cfg.pilots.num_eval_subcarriers);
  const int step = std::max(1, cfg.fft_size / count);
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(i * step + step / 2);
  return out;
}

DelayOptions delay_options(const ScenarioConfig& cfg) {
  DelayOptions opts;
  // Link delay tau_n - tau_m spans the full width of the per-node bounds.
  opts.window_s = std::max(cfg.tau_s.hi - cfg.tau_s.lo, 1e-12);
  return opts;
}

std::vector<EquivalentChannel> simulate_round_trip(Drop& drop, double centre_s) {
  const ScenarioConfig& cfg = drop.cfg();
  const PilotMap pilots = build_pilot_map(cfg.num_trp, cfg.num_calib_ue, cfg.num_subcarriers);
  const double t_dl = centre_s - cfg.pilots.cars_turnaround_s / 2.0;
  const double t_ul = centre_s + cfg.pilots.cars_turnaround_s / 2.0;
  std::vector<EquivalentChannel> out;
  for (int m = 0; m < cfg.num_trp; ++m) {
    for (int n = 0; n < cfg.num_calib_ue; ++n) {
      const std::vector<int> comb = pilots.ue_comb(m, n);
      CombSlice obs;
      obs.subcarriers = comb;
      obs.valid.assign(comb.size(), 1);
      for (int k : comb) obs.values.push_back(drop.observe(drop.dl(m, n, k, t_dl)));
      const CarsSequence cars = form_cars(estimate_channel(obs, unit_pilots(comb.size())));
      CombSlice echo;
      echo.subcarriers = comb;
      echo.valid.assign(comb.size(), 1);
      for (std::size_t i = 0; i < comb.size(); ++i) {
        echo.values.push_back(drop.observe(drop.ul(m, n, comb[i], t_ul) * cars.symbols[i]));
      }
      out.push_back(form_equivalent_channel(echo, cars, m, n, centre_s));
    }
  }
  return out;
}

CalibrationSet calibrate_ml_tls(Drop& drop, double centre_s) {
  const ScenarioConfig& cfg = drop.cfg();
  return two_step_ml_tls(simulate_round_trip(drop, centre_s), cfg.num_trp, cfg.num_calib_ue,
                         cfg.subcarrier_spacing_hz, cfg.carrier_freq_hz, delay_options(cfg));
}

CalibrationSet calibrate_ml_tls_schedule(Drop& drop, const std::vector<double>& centres_s, std::size_t reference_index) {
  std::vector<CalibrationSet> sets;
  for (double t : centres_s) sets.push_back(calibrate_ml_tls(drop, t));
  return estimate_frequency_offsets(sets, reference_index);
}

OneWayMeasurement measure_one_way(Drop& drop, const std::vector<int>& subcarriers, double t, int first_ue, int count,
                                  bool with_dl) {
  const int M = drop.cfg().num_trp;
  OneWayMeasurement meas;
  meas.subcarriers = subcarriers;
  meas.time_s = t;
  for (int k : subcarriers) {
    Eigen::MatrixXcd g(M, count);
    for (int m = 0; m < M; ++m) {
      for (int j = 0; j < count; ++j) g(m, j) = drop.observe(drop.ul(m, first_ue + j, k, t));
    }
    meas.g.push_back(std::move(g));
    if (!with_dl) continue;
    Eigen::MatrixXcd h(count, M);
    for (int j = 0; j < count; ++j) {
      for (int m = 0; m < M; ++m) h(j, m) = drop.observe(drop.dl(m, first_ue + j, k, t));
    }
    meas.h.push_back(std::move(h));
  }
  return meas;
}

CalibrationSet calibrate_baseline(Baseline kind, const OneWayMeasurement& meas, double df, double fc) {
  if (meas.h.size() != meas.g.size()) throw ValidationError("calibrate_baseline: DL measurements required");
  std::vector<NodeCoefficients> per_k;
  for (std::size_t i = 0; i < meas.g.size(); ++i) {
    switch (kind) {
      case Baseline::argos: per_k.push_back(argos_nodes(meas.g[i], meas.h[i], 0)); break;
      case Baseline::argos_mean: per_k.push_back(argos_mean(meas.g[i], meas.h[i])); break;
      case Baseline::tls: per_k.push_back(tls_classic(meas.g[i], meas.h[i])); break;
    }
  }
  const char* name = kind == Baseline::argos ? "argos" : kind == Baseline::argos_mean ? "argos_mean" : "tls";
  return tabulate(name, meas.subcarriers, per_k, df, fc, meas.time_s);
}

double evaluate_se(const Drop& drop, const OneWayMeasurement& meas, int first_ue, const BsGain& gain,
                   PrecoderKind kind, PowerMode mode) {
  const int M = drop.cfg().num_trp;
  double total = 0.0;
  for (std::size_t i = 0; i < meas.subcarriers.size(); ++i) {
    const int k = meas.subcarriers[i];
    const Eigen::Index count = meas.g[i].cols();
    Eigen::VectorXcd c = Eigen::VectorXcd::Ones(M);
    if (gain) {
      for (int m = 0; m < M; ++m) c(m) = gain(m, k);
    }
    const Precoder prec = calibrated_precoder(dl_from_ul(meas.g[i], c), kind, mode);
    Eigen::MatrixXcd h_true(count, M);
    for (Eigen::Index j = 0; j < count; ++j) {
      for (int m = 0; m < M; ++m) h_true(j, m) = drop.dl(m, first_ue + static_cast<int>(j), k, meas.time_s);
    }
    total += spectral_efficiency(sinr(h_true, prec, effective_noise(drop)));
  }
  return total / static_cast<double>(meas.subcarriers.size());
}

double link_phase_rmse(const Drop& drop, const std::vector<int>& subcarriers, double t,
                       const std::function<cplx(int m, int n, int k)>& estimate) {
  std::vector<cplx> est;
  std::vector<cplx> truth;
  for (int m = 0; m < drop.cfg().num_trp; ++m) {
    for (int n = 0; n < drop.cfg().num_calib_ue; ++n) {
      for (int k : subcarriers) {
        est.push_back(estimate(m, n, k));
        truth.push_back(drop.true_c(m, n, k, t));
      }
    }
  }
  return phase_rmse_deg(est, truth);
}

double NamedValues::get(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw ValidationError("no value named '" + name + "'");
}

void NamedValues::set(const std::string& name, double value) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      values[i] = value;
      return;
    }
  }
  names.push_back(name);
  values.push_back(value);
}

QuasiStaticDrop run_quasi_static_drop(const ScenarioConfig& cfg_in, std::uint64_t index, PrecoderKind kind) {
  const ScenarioConfig cfg = with_static_ues(cfg_in);
  Drop drop(cfg, index);
  const double df = cfg.subcarrier_spacing_hz;
  const double fc = cfg.carrier_freq_hz;
  const double t0 = cfg.pilots.cars_symbols.front() * cfg.symbol_interval_s;
  const std::vector<int> ks = eval_subcarriers(cfg);
  const int nc = cfg.num_calib_ue;
  const int first = cfg.num_ue > nc ? nc : 0;
  const int count = cfg.num_ue - first;

  const CalibrationSet ml = calibrate_ml_tls(drop, t0);
  const OneWayMeasurement base = measure_one_way(drop, ks, t0, 0, nc, true);
  const CalibrationSet argos_set = calibrate_baseline(Baseline::argos, base, df, fc);
  const CalibrationSet argos_mean_set = calibrate_baseline(Baseline::argos_mean, base, df, fc);
  const CalibrationSet tls_set = calibrate_baseline(Baseline::tls, base, df, fc);
  const OneWayMeasurement eval = measure_one_way(drop, ks, t0, first, count, false);

  QuasiStaticDrop out;
  auto from_set = [t0](const CalibrationSet& s) { return BsGain([&s, t0](int m, int k) { return s.bs(m, k, t0); }); };
  const BsGain genie = [&drop, t0](int m, int k) { return drop.true_bs(m, k, t0); };
  const auto mode = PowerMode::per_port;
  out.se.set("uncalibrated", evaluate_se(drop, eval, first, BsGain{}, kind, mode));
  out.se.set("argos", evaluate_se(drop, eval, first, from_set(argos_set), kind, mode));
  out.se.set("argos_mean", evaluate_se(drop, eval, first, from_set(argos_mean_set), kind, mode));
  out.se.set("tls", evaluate_se(drop, eval, first, from_set(tls_set), kind, mode));
  out.se.set("ml_tls", evaluate_se(drop, eval, first, from_set(ml), kind, mode));
  out.se.set("genie", evaluate_se(drop, eval, first, genie, kind, mode));

  auto link_of = [t0](const CalibrationSet& s) {
    return [&s, t0](int m, int n, int k) { return s.link(m, n, k, t0); };
  };
  out.phase_rmse_deg.set("uncalibrated", link_phase_rmse(drop, ks, t0, [](int, int, int) { return cplx{1.0, 0.0}; }));
  out.phase_rmse_deg.set("argos", link_phase_rmse(drop, ks, t0, link_of(argos_set)));
  out.phase_rmse_deg.set("argos_mean", link_phase_rmse(drop, ks, t0, link_of(argos_mean_set)));
  out.phase_rmse_deg.set("tls", link_phase_rmse(drop, ks, t0, link_of(tls_set)));
  out.phase_rmse_deg.set("ml_tls", link_phase_rmse(drop, ks, t0, link_of(ml)));
  out.phase_rmse_deg.set("genie", 0.0);
  return out;
}

std::size_t DynamicDrop::series(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw ValidationError("no dynamic series named '" + name + "'");
}

DynamicDrop run_dynamic_drop(const ScenarioConfig& cfg, std::uint64_t index, const DynamicOptions& options) {
  Drop drop(cfg, index);
  const int M = cfg.num_trp;
  const int nc = cfg.num_calib_ue;
  const int first = cfg.num_ue > nc ? nc : 0;
  const int count = cfg.num_ue - first;
  const double T = cfg.symbol_interval_s;
  const std::vector<double> centres = centre_times(cfg);
  const CalibrationSet cal = calibrate_ml_tls_schedule(drop, centres, centres.size() - 1);
  const double t_base = centres.back();

  // Sensing window: one-way SRS snapshots ending at the last round trip.
  std::vector<std::vector<std::vector<SensedPath>>> sensed(static_cast<std::size_t>(nc),
                                                           std::vector<std::vector<SensedPath>>(M));
  const int num_sense = cfg.pilots.sensing_symbols;
  const double sense_start = t_base - (num_sense - 1) * T;
  for (int n = 0; n < nc; ++n) {
    for (int m = 0; m < M; ++m) {
      const LinkGrid raw = observe_grid(drop, m, n, srs_comb(n, cfg.num_ue, cfg.num_subcarriers),
                                        symbol_times(num_sense, T, sense_start));
      sensed[n][m] = estimate_paths(recover_link(raw, cal, m, n));
    }
  }

  const std::vector<int> ks = eval_subcarriers(cfg);
  TrackOptions topts;
  topts.robust_aggregate = options.robust_tracking;
  std::vector<std::vector<TrackState>> direct(static_cast<std::size_t>(nc));
  std::vector<std::vector<TrackState>> assisted(static_cast<std::size_t>(nc));
  for (int n = 0; n < nc; ++n) {
    for (int m = 0; m < M; ++m) {
      std::vector<cplx> base;
      std::vector<cplx> pilot;
      for (int k : ks) {
        base.push_back(cal.link(m, n, k, t_base));
        pilot.push_back(drop.observe(drop.ul(m, n, k, t_base)));
      }
      direct[n].push_back(start_track(m, n, ks, base, pilot, t_base));
      assisted[n].push_back(start_track(m, n, ks, base, pilot, t_base, predict_at(sensed[n][m], cfg, ks, t_base)));
    }
  }

  DynamicDrop out;
  out.names = {"uncalibrated", "no_tracking", "direct", "sensing_assisted", "ml_tls_propagated", "genie"};
  const int P = cfg.pilots.tracking_patterns;
  out.se.assign(out.names.size(), std::vector<double>(static_cast<std::size_t>(P), 0.0));
  out.rmse.assign(out.names.size(), std::vector<double>(static_cast<std::size_t>(P), 0.0));

  std::vector<std::vector<TrackResult>> direct_res(static_cast<std::size_t>(nc), std::vector<TrackResult>(M));
  std::vector<std::vector<TrackResult>> assisted_res(static_cast<std::size_t>(nc), std::vector<TrackResult>(M));
  for (int p = 1; p <= P; ++p) {
    const double t = t_base + p * T;
    for (int n = 0; n < nc; ++n) {
      for (int m = 0; m < M; ++m) {
        std::vector<cplx> pilot;
        for (int k : ks) pilot.push_back(drop.observe(drop.ul(m, n, k, t)));
        direct_res[n][m] = track_quasi_static(direct[n][m], pilot, t, topts);
        assisted_res[n][m] =
            track_sensing_assisted(assisted[n][m], pilot, predict_at(sensed[n][m], cfg, ks, t), t, topts);
      }
    }
    const std::vector<cplx> direct_upd = bs_phase_update(direct, M - 1);
    const std::vector<cplx> assisted_upd = bs_phase_update(assisted, M - 1);
    const OneWayMeasurement eval = measure_one_way(drop, ks, t, first, count, false);

    const BsGain stale = [&](int m, int k) { return cal.bs(m, k, t_base); };
    const BsGain gains[] = {
        BsGain{},
        stale,
        [&](int m, int k) { return cal.bs(m, k, t_base) * direct_upd[m]; },
        [&](int m, int k) { return cal.bs(m, k, t_base) * assisted_upd[m]; },
        [&](int m, int k) { return cal.bs(m, k, t); },
        [&](int m, int k) { return drop.true_bs(m, k, t); },
    };
    for (std::size_t s = 0; s < out.names.size(); ++s) {
      out.se[s][p - 1] = evaluate_se(drop, eval, first, gains[s], options.precoder, PowerMode::per_port);
    }

    auto tracked = [&ks](const std::vector<std::vector<TrackResult>>& res) {
      return [&res, &ks](int m, int n, int k) {
        const auto pos = std::find(ks.begin(), ks.end(), k) - ks.begin();
        return res[n][m].coeff[static_cast<std::size_t>(pos)];
      };
    };
    out.rmse[0][p - 1] = link_phase_rmse(drop, ks, t, [](int, int, int) { return cplx{1.0, 0.0}; });
    out.rmse[1][p - 1] = link_phase_rmse(drop, ks, t, [&](int m, int n, int k) { return cal.link(m, n, k, t_base); });
    out.rmse[2][p - 1] = link_phase_rmse(drop, ks, t, tracked(direct_res));
    out.rmse[3][p - 1] = link_phase_rmse(drop, ks, t, tracked(assisted_res));
    out.rmse[4][p - 1] = link_phase_rmse(drop, ks, t, [&](int m, int n, int k) { return cal.link(m, n, k, t); });
    out.rmse[5][p - 1] = 0.0;

    for (int m = 0; m < M; ++m) {
      const TrackState& st = assisted[0][m];
      const double err = wrap_phase(std::arg(assisted_res[0][m].coeff[0]) - std::arg(drop.true_c(m, 0, ks[0], t)));
      out.trace.push_back({p, m, 0, st.phi_hat[0], err});
    }
  }
  return out;
}

LocalizationDrop run_localization_drop(const ScenarioConfig& cfg_in, std::uint64_t index, int num_anchors) {
  const ScenarioConfig cfg = with_static_ues(cfg_in);
  if (num_anchors < 3 || num_anchors > cfg.num_trp) {
    throw ValidationError("localization: need between 3 and num_trp anchors");
  }
  Drop drop(cfg, index);
  const std::vector<double> centres = centre_times(cfg);
  const CalibrationSet cal = calibrate_ml_tls_schedule(drop, centres, centres.size() - 1);
  const double T = cfg.symbol_interval_s;
  const int num_sense = cfg.pilots.sensing_symbols;
  const double start = centres.back() - (num_sense - 1) * T;

  std::vector<Vec3> anchors(drop.geometry().trp_positions_m.begin(),
                            drop.geometry().trp_positions_m.begin() + num_anchors);
  LocalizationDrop out;
  for (int n = 0; n < cfg.num_calib_ue; ++n) {
    std::vector<double> raw_ranges;
    std::vector<double> cal_ranges;
    for (int m = 0; m < num_anchors; ++m) {
      const LinkGrid raw =
          observe_grid(drop, m, n, srs_comb(n, cfg.num_ue, cfg.num_subcarriers), symbol_times(num_sense, T, start));
      raw_ranges.push_back(estimate_paths(raw).front().d_hat_m);
      cal_ranges.push_back(estimate_paths(recover_link(raw, cal, m, n)).front().d_hat_m);
    }
    const Vec3& truth = drop.geometry().ue_positions_m[n];
    auto error = [&truth](const LocalizationResult& r) {
      return std::hypot(r.position[0] - truth[0], r.position[1] - truth[1]);
    };
    try {
      const LocalizationResult a = localize(anchors, cal_ranges);
      const LocalizationResult b = localize(anchors, raw_ranges);
      out.calibrated_m.push_back(error(a));
      out.uncalibrated_m.push_back(error(b));
    } catch (const EstimationError&) {
      ++out.failures;
    }
  }
  return out;
}

CoherentGainDrop run_coherent_gain_drop(const ScenarioConfig& cfg_in, std::uint64_t index, PowerMode mode,
                                        double radius_m) {
  ScenarioConfig cfg = cfg_in;
  cfg.geometry.trp_positions_m.clear();
  cfg.geometry.trp_velocities_mps.clear();
  for (int m = 0; m < cfg.num_trp; ++m) {
    const double a = kTwoPi * m / cfg.num_trp;
    cfg.geometry.trp_positions_m.push_back({radius_m * std::cos(a), radius_m * std::sin(a), 0.0});
  }
  cfg.geometry.ue_positions_m = {Vec3{}};
  cfg.geometry.ue_velocities_mps = {Vec3{}};
  cfg.geometry.scatterers.clear();
  cfg.num_ue = 1;
  cfg.num_calib_ue = 1;
  Drop drop(cfg, index);
  const int k = cfg.fft_size / 2;
  const double noise = effective_noise(drop);

  CoherentGainDrop out;
  for (int p = 1; p <= cfg.num_trp; p *= 2) {
    Eigen::MatrixXcd h_true(1, p);
    Eigen::MatrixXcd h_raw(1, p);
    for (int m = 0; m < p; ++m) {
      h_true(0, m) = drop.dl(m, 0, k, 0.0);
      h_raw(0, m) = drop.ul(m, 0, k, 0.0);
    }
    const double ideal = sinr(h_true, calibrated_precoder(h_true, PrecoderKind::mrt, mode), noise)[0];
    const double raw = sinr(h_true, calibrated_precoder(h_raw, PrecoderKind::mrt, mode), noise)[0];
    out.ports.push_back(p);
    out.ideal_snr_db.push_back(linear_to_db(ideal));
    out.uncalibrated_snr_db.push_back(linear_to_db(std::max(raw, 1e-300)));
  }
  return out;
}

SensingDemo run_sensing_demo(const ScenarioConfig& cfg_in, const SensingDemoOptions& options) {
  ScenarioConfig cfg = cfg_in;
  cfg.num_trp = 1;
  cfg.num_ue = 1;
  cfg.num_calib_ue = 1;
  cfg.geometry.trp_positions_m = {Vec3{}};
  cfg.geometry.trp_velocities_mps = {Vec3{}};
  cfg.geometry.ue_positions_m = {Vec3{options.los_distance_m, 0.0, 0.0}};
  cfg.geometry.ue_velocities_mps = {Vec3{}};
  cfg.geometry.scatterers.clear();
  Drop drop(cfg, 0);
  drop.impairments().trp[0].e = 0.0;
  drop.impairments().ue[0].e = options.e_offset;
  LinkPathSet& link = drop.paths()[0];
  const Path los = link.paths.front();
  link.paths.push_back({std::abs(los.alpha) * std::pow(10.0, options.mover_gain_db / 20.0) * expj(1.0),
                        los.d_m + options.mover_extra_m, options.mover_velocity_mps});

  const std::vector<double> centres = centre_times(cfg);
  const CalibrationSet cal = calibrate_ml_tls_schedule(drop, centres, centres.size() - 1);

  std::vector<int> comb;
  for (int i = 0; i < cfg.num_subcarriers; ++i) comb.push_back(i * kDemoCombStride);
  const LinkGrid raw = observe_grid(drop, 0, 0, comb, symbol_times(cfg.num_symbols, cfg.symbol_interval_s));
  const LinkGrid rec = recover_link(raw, cal, 0, 0);

  SensingDemo out;
  out.los_range_m = los.d_m;
  out.uncalibrated = range_doppler(raw, Window::hann);
  out.calibrated = range_doppler(rec, Window::hann);
  out.mti = range_doppler(mti_filter(rec), Window::hann);
  CfarOptions copts;
  copts.pfa = options.pfa;
  out.detections = cfar_detect(out.mti, copts);
  out.uncalibrated_peak_doppler_bin = peak_doppler_bin(out.uncalibrated);
  out.calibrated_peak_doppler_bin = peak_doppler_bin(out.calibrated);

  std::vector<cplx> raw_row(raw.num_t());
  std::vector<cplx> rec_row(rec.num_t());
  for (std::size_t l = 0; l < raw.num_t(); ++l) {
    raw_row[l] = raw.at(0, l);
    rec_row[l] = rec.at(0, l);
  }
  out.stft_uncalibrated = stft_offset(raw_row, cfg.symbol_interval_s, 16, 8, Window::hann);
  out.stft_calibrated = stft_offset(rec_row, cfg.symbol_interval_s, 16, 8, Window::hann);
  return out;
}

double round_trip_delay_crlb_s2(double rho, int k, double comb_spacing_hz) {
  if (rho <= 0.0 || k < 2 || comb_spacing_hz <= 0.0) throw ValidationError("delay CRLB: need rho > 0, K >= 2, df > 0");
  const double kk = static_cast<double>(k);
  return 3.0 / (8.0 * rho * kPi * kPi * comb_spacing_hz * comb_spacing_hz * kk * (kk * kk - 1.0));
}

CrlbPoint run_crlb_point(const ScenarioConfig& cfg, double rho_db, int trials, std::uint64_t stream_index) {
  if (trials < 1) throw ValidationError("crlb: trials must be >= 1");
  const PilotMap pilots = build_pilot_map(cfg.num_trp, cfg.num_calib_ue, cfg.num_subcarriers);
  const std::vector<int> comb = pilots.ue_comb(0, 0);
  const double df = cfg.subcarrier_spacing_hz;
  const double rho = db_to_linear(rho_db);
  const DelayOptions opts = delay_options(cfg);
  Rng rng(cfg.seed, Stream::monte_carlo, stream_index);

  double ss = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double tau = rng.uniform(-0.5 * opts.window_s, 0.5 * opts.window_s);
    const double theta = rng.uniform(-kPi, kPi);
    CombSlice g;
    g.subcarriers = comb;
    g.valid.assign(comb.size(), 1);
    for (int k : comb) g.values.push_back(expj(theta - 2.0 * kTwoPi * k * df * tau) + rng.complex_normal(1.0 / rho));
    const double err = ml_delay_coeff(g, df, opts).tau_s - tau;
    ss += err * err;
  }
  CrlbPoint out;
  out.rho_db = rho_db;
  out.trials = trials;
  out.rmse_s = std::sqrt(ss / trials);
  out.crlb_s = std::sqrt(round_trip_delay_crlb_s2(rho, static_cast<int>(comb.size()),
                                                  df * cfg.num_trp * cfg.num_calib_ue));
  return out;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace simcal
