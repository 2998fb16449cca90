#include "simcal/sensing.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include <unsupported/Eigen/FFT>

#include "simcal/csv.hpp"

namespace simcal {

namespace {

constexpr double kGolden = 0.6180339887498949;

double comb_spacing_hz(const ChannelMeta& meta) {
  if (meta.num_k() < 2) throw ValidationError("sensing: need at least two subcarriers");
  const int step = meta.subcarriers[1] - meta.subcarriers[0];
  if (step <= 0) throw ValidationError("sensing: subcarriers must be ascending");
  for (std::size_t i = 2; i < meta.num_k(); ++i) {
    if (meta.subcarriers[i] - meta.subcarriers[i - 1] != step) throw ValidationError("sensing: comb is not uniform");
  }
  return step * meta.subcarrier_spacing_hz;
}

double sample_interval_s(const ChannelMeta& meta) {
  if (meta.num_t() < 2) throw ValidationError("sensing: need at least two time samples");
  const double dt = meta.times_s[1] - meta.times_s[0];
  if (!(dt > 0.0)) throw ValidationError("sensing: times must be ascending");
  for (std::size_t i = 2; i < meta.num_t(); ++i) {
    if (std::abs(meta.times_s[i] - meta.times_s[i - 1] - dt) > 1e-9 * dt) {
      throw ValidationError("sensing: times are not uniformly spaced");
    }
  }
  return dt;
}

std::vector<double> window_weights(std::size_t n, Window window) {
  std::vector<double> w(n, 1.0);
  if (window == Window::hann && n > 1) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / (n - 1.0));
  }
  return w;
}

// Vertex offset of a parabola through (-1, a), (0, b), (1, c), clamped to half a bin.
double parabolic_offset(double a, double b, double c) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) return 0.0;
  const double den = a - 2.0 * b + c;
  if (den >= 0.0) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

template <typename F>
double golden_max(F&& f, double lo, double hi, int iterations) {
  double a = lo;
  double b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iterations; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// Sums over the (2w+1)^2 cyclic neighbourhood of every cell.
std::vector<double> cyclic_box_sum(const std::vector<double>& p, std::size_t rows, std::size_t cols, int w) {
  const std::size_t er = rows + 2 * static_cast<std::size_t>(w);
  const std::size_t ec = cols + 2 * static_cast<std::size_t>(w);
  std::vector<double> s((er + 1) * (ec + 1), 0.0);
  for (std::size_t i = 0; i < er; ++i) {
    const std::size_t r = (i + rows * 4 - static_cast<std::size_t>(w)) % rows;
    double row_sum = 0.0;
    for (std::size_t j = 0; j < ec; ++j) {
      const std::size_t c = (j + cols * 4 - static_cast<std::size_t>(w)) % cols;
      row_sum += p[r * cols + c];
      s[(i + 1) * (ec + 1) + (j + 1)] = s[i * (ec + 1) + (j + 1)] + row_sum;
    }
  }
  const std::size_t span = 2 * static_cast<std::size_t>(w) + 1;
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t r1 = r + span;
      const std::size_t c1 = c + span;
      out[r * cols + c] = s[r1 * (ec + 1) + c1] - s[r * (ec + 1) + c1] - s[r1 * (ec + 1) + c] + s[r * (ec + 1) + c];
    }
  }
  return out;
}

}  // namespace

LinkGrid link_grid(const ChannelTensor& ch, int m, int n) { return {ch.meta(), ch.link(m, n)}; }

LinkGrid recover_link(const LinkGrid& ul, const CalibrationSet& cal, int m, int n) {
  if (!cal.has_tau || !cal.has_e || cal.tau_link.empty() || cal.e_link.empty()) {
    throw EstimationError("recover_ota: calibration lacks delay/frequency estimates; run calibration first");
  }
  if (m < 0 || m >= cal.num_trp || n < 0 || n >= cal.num_ue) throw EstimationError("recover_ota: link not calibrated");
  const std::size_t i = cal.link_index(m, n);
  const cplx root = std::sqrt(std::conj(cal.link(m, n, 0, cal.ref_time_s)));
  const double tau = cal.tau_link[i];
  const double e = cal.e_link[i];
  LinkGrid out = ul;
  const ChannelMeta& meta = ul.meta;
  for (std::size_t k = 0; k < meta.num_k(); ++k) {
    for (std::size_t l = 0; l < meta.num_t(); ++l) {
      const double phase = kTwoPi * meta.subcarriers[k] * meta.subcarrier_spacing_hz * tau -
                           kTwoPi * e * meta.carrier_freq_hz * (meta.times_s[l] - cal.ref_time_s);
      out.at(k, l) = ul.at(k, l) * root * expj(phase);
    }
  }
  return out;
}

ChannelTensor recover_ota(const ChannelTensor& ul, const CalibrationSet& cal) {
  const int num_ue = std::min(ul.num_ue(), cal.num_ue);
  const int num_trp = std::min(ul.num_trp(), cal.num_trp);
  ChannelTensor out(Direction::ota, num_trp, num_ue, ul.meta());
  for (int m = 0; m < num_trp; ++m) {
    for (int n = 0; n < num_ue; ++n) {
      const LinkGrid rec = recover_link(link_grid(ul, m, n), cal, m, n);
      std::copy(rec.values.begin(), rec.values.end(),
                out.values().begin() + static_cast<std::ptrdiff_t>(out.index(m, n, 0, 0)));
    }
  }
  return out;
}

RangeDopplerMap RangeDopplerMap::from_power(std::size_t num_range, std::size_t num_doppler, std::vector<double> power) {
  RangeDopplerMap map;
  map.num_range = num_range;
  map.num_doppler = num_doppler;
  map.power = std::move(power);
  map.cells.assign(map.power.size(), cplx{});
  map.power_db.resize(map.power.size());
  for (std::size_t i = 0; i < map.power.size(); ++i) {
    map.cells[i] = std::sqrt(map.power[i]);
    map.power_db[i] = map.power[i] > 0.0 ? linear_to_db(map.power[i]) : -std::numeric_limits<double>::infinity();
  }
  map.range_axis_m.assign(num_range, 0.0);
  map.velocity_axis_mps.assign(num_doppler, 0.0);
  map.zero_doppler_index = num_doppler / 2;
  return map;
}

double unambiguous_velocity(double carrier_freq_hz, double pilot_interval_s) {
  return kSpeedOfLight / (2.0 * carrier_freq_hz * pilot_interval_s);
}

double unambiguous_range(double comb_spacing_hz) { return kSpeedOfLight / comb_spacing_hz; }

RangeDopplerMap range_doppler(const LinkGrid& grid, Window window) {
  const std::size_t kk = grid.num_k();
  const std::size_t ll = grid.num_t();
  const double df_comb = comb_spacing_hz(grid.meta);
  const double interval = sample_interval_s(grid.meta);
  const std::vector<double> wk = window_weights(kk, window);
  const std::vector<double> wl = window_weights(ll, window);
  double gain = 0.0;
  {
    double sk = 0.0;
    double sl = 0.0;
    for (double w : wk) sk += w;
    for (double w : wl) sl += w;
    gain = sk * sl;
  }

  Eigen::FFT<double> fft;
  std::vector<cplx> ranged(kk * ll);
  std::vector<cplx> in(kk);
  std::vector<cplx> out;
  for (std::size_t l = 0; l < ll; ++l) {
    for (std::size_t k = 0; k < kk; ++k) in[k] = grid.at(k, l) * wk[k] * wl[l];
    fft.inv(out, in);
    for (std::size_t r = 0; r < kk; ++r) ranged[r * ll + l] = out[r] * static_cast<double>(kk);
  }

  RangeDopplerMap map;
  map.num_range = kk;
  map.num_doppler = ll;
  map.zero_doppler_index = ll / 2;
  map.cells.resize(kk * ll);
  std::vector<cplx> row(ll);
  for (std::size_t r = 0; r < kk; ++r) {
    for (std::size_t l = 0; l < ll; ++l) row[l] = ranged[r * ll + l];
    fft.fwd(out, row);
    for (std::size_t p = 0; p < ll; ++p) {
      const std::size_t shifted = (p + map.zero_doppler_index) % ll;
      map.cells[r * ll + shifted] = out[p] / gain;
    }
  }
  map.power.resize(kk * ll);
  map.power_db.resize(kk * ll);
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    map.power[i] = std::norm(map.cells[i]);
    map.power_db[i] = map.power[i] > 0.0 ? linear_to_db(map.power[i]) : -std::numeric_limits<double>::infinity();
  }
  map.range_bin_m = kSpeedOfLight / (static_cast<double>(kk) * df_comb);
  map.velocity_bin_mps = kSpeedOfLight / (grid.meta.carrier_freq_hz * static_cast<double>(ll) * interval);
  map.range_axis_m.resize(kk);
  for (std::size_t r = 0; r < kk; ++r) map.range_axis_m[r] = static_cast<double>(r) * map.range_bin_m;
  map.velocity_axis_mps.resize(ll);
  for (std::size_t p = 0; p < ll; ++p) {
    map.velocity_axis_mps[p] =
        (static_cast<double>(p) - static_cast<double>(map.zero_doppler_index)) * map.velocity_bin_mps;
  }
  return map;
}

namespace {
double training_cells(int guard, int train) {
  const int outer = 2 * (guard + train) + 1;
  const int inner = 2 * guard + 1;
  return static_cast<double>(outer * outer - inner * inner);
}
}  // namespace

double cfar_scale(int guard, int train, double pfa) {
  const double n = training_cells(guard, train);
  return n * (std::pow(pfa, -1.0 / n) - 1.0);
}

std::vector<double> cfar_threshold(const RangeDopplerMap& map, const CfarOptions& options) {
  if (options.guard < 0 || options.train < 1) throw ValidationError("cfar: need guard >= 0 and train >= 1");
  if (!(options.pfa > 0.0 && options.pfa < 1.0)) throw ValidationError("cfar: pfa must lie in (0, 1)");
  const int w = options.guard + options.train;
  if (static_cast<std::size_t>(2 * w + 1) > map.num_range || static_cast<std::size_t>(2 * w + 1) > map.num_doppler) {
    throw ValidationError("cfar: training window larger than the map");
  }
  const double n_train = training_cells(options.guard, options.train);
  const double alpha = cfar_scale(options.guard, options.train, options.pfa);
  const std::vector<double> outer = cyclic_box_sum(map.power, map.num_range, map.num_doppler, w);
  const std::vector<double> inner = cyclic_box_sum(map.power, map.num_range, map.num_doppler, options.guard);
  std::vector<double> thr(map.power.size());
  for (std::size_t i = 0; i < thr.size(); ++i) thr[i] = alpha * (outer[i] - inner[i]) / n_train;
  return thr;
}

std::vector<Detection> cfar_detect(const RangeDopplerMap& map, const CfarOptions& options) {
  const std::vector<double> thr = cfar_threshold(map, options);
  const std::size_t rows = map.num_range;
  const std::size_t cols = map.num_doppler;
  std::vector<Detection> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = 0; p < cols; ++p) {
      const double v = map.power[map.index(r, p)];
      if (!(v > thr[map.index(r, p)]) || !(v > 0.0)) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dp = -1; dp <= 1; ++dp) {
          if (dr == 0 && dp == 0) continue;
          const std::size_t rr = (r + rows + static_cast<std::size_t>(dr + 1) - 1) % rows;
          const std::size_t pp = (p + cols + static_cast<std::size_t>(dp + 1) - 1) % cols;
          if (map.power[map.index(rr, pp)] > v) {
            peak = false;
            break;
          }
        }
      }
      if (!peak) continue;
      const auto db = [&](std::size_t rr, std::size_t pp) { return map.power_db[map.index(rr % rows, pp % cols)]; };
      const double off_r = parabolic_offset(db(r + rows - 1, p), db(r, p), db(r + 1, p));
      const double off_p = parabolic_offset(db(r, p + cols - 1), db(r, p), db(r, p + 1));
      Detection d;
      d.range_bin = r;
      d.doppler_bin = p;
      d.range_m = (static_cast<double>(r) + off_r) * map.range_bin_m;
      d.velocity_mps =
          (static_cast<double>(p) - static_cast<double>(map.zero_doppler_index) + off_p) * map.velocity_bin_mps;
      d.power_db = map.power_db[map.index(r, p)];
      d.path = {map.cells[map.index(r, p)], d.range_m, d.velocity_mps, d.power_db};
      out.push_back(d);
    }
  }
  return out;
}

LinkGrid mti_filter(const LinkGrid& grid, MtiMode mode) {
  if (grid.num_t() < 2) throw ValidationError("mti: need at least two slow-time samples");
  LinkGrid out = grid;
  for (std::size_t k = 0; k < grid.num_k(); ++k) {
    if (mode == MtiMode::mean_subtraction) {
      cplx mean{};
      for (std::size_t l = 0; l < grid.num_t(); ++l) mean += grid.at(k, l);
      mean /= static_cast<double>(grid.num_t());
      for (std::size_t l = 0; l < grid.num_t(); ++l) out.at(k, l) = grid.at(k, l) - mean;
    } else {
      out.at(k, 0) = 0.0;
      for (std::size_t l = 1; l < grid.num_t(); ++l) out.at(k, l) = grid.at(k, l) - grid.at(k, l - 1);
    }
  }
  return out;
}

std::vector<StftFrame> stft_offset(const std::vector<cplx>& row, double interval_s, std::size_t window_len,
                                   std::size_t hop, Window window) {
  if (window_len < 2 || window_len > row.size()) throw ValidationError("stft: window length must lie in [2, L]");
  if (hop < 1) throw ValidationError("stft: hop must be positive");
  const std::vector<double> w = window_weights(window_len, window);
  const double bin = 1.0 / (static_cast<double>(window_len) * interval_s);
  const std::size_t zero = window_len / 2;
  Eigen::FFT<double> fft;
  std::vector<cplx> in(window_len);
  std::vector<cplx> out;
  std::vector<StftFrame> frames;
  for (std::size_t start = 0; start + window_len <= row.size(); start += hop) {
    for (std::size_t i = 0; i < window_len; ++i) in[i] = row[start + i] * w[i];
    fft.fwd(out, in);
    std::vector<double> mag(window_len);
    for (std::size_t p = 0; p < window_len; ++p) mag[(p + zero) % window_len] = std::abs(out[p]);
    const std::size_t best = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    double offset = 0.0;
    if (mag[best] > 0.0) {
      offset = parabolic_offset(mag[(best + window_len - 1) % window_len], mag[best], mag[(best + 1) % window_len]);
    }
    StftFrame f;
    f.time_s = (static_cast<double>(start) + 0.5 * static_cast<double>(window_len - 1)) * interval_s;
    // Interpolation past the band edge aliases back into [-fs / 2, fs / 2).
    const double rate = 1.0 / interval_s;
    double freq = mag[best] > 0.0 ? (static_cast<double>(best) - static_cast<double>(zero) + offset) * bin : 0.0;
    freq -= rate * std::floor(freq / rate + 0.5);
    f.freq_hz = freq;
    f.magnitude = mag[best];
    f.bin_hz = bin;
    frames.push_back(f);
  }
  return frames;
}

LinkGrid predict_channel(const std::vector<SensedPath>& paths, const ChannelMeta& meta) {
  if (paths.empty()) throw ValidationError("predict_channel: no sensed paths");
  LinkPathSet link;
  for (const SensedPath& p : paths) link.paths.push_back({p.alpha_hat, p.d_hat_m, p.v_hat_mps});
  LinkGrid out{meta, std::vector<cplx>(meta.num_k() * meta.num_t())};
  for (std::size_t k = 0; k < meta.num_k(); ++k) {
    for (std::size_t l = 0; l < meta.num_t(); ++l) {
      out.at(k, l) =
          ota_sample(link, meta.subcarriers[k], meta.times_s[l], meta.subcarrier_spacing_hz, meta.carrier_freq_hz);
    }
  }
  return out;
}

std::vector<SensedPath> estimate_paths(const LinkGrid& grid, const PathEstimateOptions& options) {
  const std::size_t kk = grid.num_k();
  const std::size_t ll = grid.num_t();
  const ChannelMeta& meta = grid.meta;
  const double df = meta.subcarrier_spacing_hz;
  const double fc = meta.carrier_freq_hz;
  LinkGrid residual = grid;
  std::vector<SensedPath> paths;
  double first_power = 0.0;

  std::vector<cplx> y(kk);
  std::vector<cplx> z(ll);
  for (std::size_t q = 0; q < options.max_paths; ++q) {
    const RangeDopplerMap map = range_doppler(residual);
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(map.power.begin(), map.power.end()) - map.power.begin());
    if (!(map.power[best] > 0.0)) break;
    if (q == 0) {
      first_power = map.power[best];
    } else if (map.power[best] < first_power * db_to_linear(options.min_relative_db)) {
      break;
    }
    double d = map.range_axis_m[best / ll];
    double v = map.velocity_axis_mps[best % ll];

    const auto fill_y = [&](double vel) {
      for (std::size_t k = 0; k < kk; ++k) {
        cplx acc{};
        for (std::size_t l = 0; l < ll; ++l) {
          acc += residual.at(k, l) * expj(-kTwoPi * (vel / kSpeedOfLight) * fc * meta.times_s[l]);
        }
        y[k] = acc;
      }
    };
    const auto fill_z = [&](double dist) {
      for (std::size_t l = 0; l < ll; ++l) {
        cplx acc{};
        for (std::size_t k = 0; k < kk; ++k) {
          acc += residual.at(k, l) * expj(kTwoPi * meta.subcarriers[k] * df * dist / kSpeedOfLight);
        }
        z[l] = acc;
      }
    };
    const auto f_d = [&](double dist) {
      cplx acc{};
      for (std::size_t k = 0; k < kk; ++k) acc += y[k] * expj(kTwoPi * meta.subcarriers[k] * df * dist / kSpeedOfLight);
      return std::norm(acc);
    };
    const auto f_v = [&](double vel) {
      cplx acc{};
      for (std::size_t l = 0; l < ll; ++l) {
        acc += z[l] * expj(-kTwoPi * (vel / kSpeedOfLight) * fc * meta.times_s[l]);
      }
      return std::norm(acc);
    };

    double half_d = map.range_bin_m;
    double half_v = map.velocity_bin_mps;
    for (int round = 0; round < options.rounds; ++round) {
      fill_y(v);
      d = golden_max(f_d, d - half_d, d + half_d, options.golden_iterations);
      fill_z(d);
      v = golden_max(f_v, v - half_v, v + half_v, options.golden_iterations);
      half_d *= 0.5;
      half_v *= 0.5;
    }
    fill_z(d);
    cplx acc{};
    for (std::size_t l = 0; l < ll; ++l) acc += z[l] * expj(-kTwoPi * (v / kSpeedOfLight) * fc * meta.times_s[l]);
    const cplx alpha = acc / static_cast<double>(kk * ll);

    for (std::size_t k = 0; k < kk; ++k) {
      for (std::size_t l = 0; l < ll; ++l) {
        residual.at(k, l) -= alpha * expj(-kTwoPi * meta.subcarriers[k] * df * d / kSpeedOfLight +
                                          kTwoPi * (v / kSpeedOfLight) * fc * meta.times_s[l]);
      }
    }
    // d and d + c / df_comb are indistinguishable on the comb; fold into [0, range_max)
    // and move the constant comb-offset phase into alpha.
    const double range_max = map.range_bin_m * static_cast<double>(kk);
    double d_wrapped = std::fmod(d, range_max);
    if (d_wrapped < 0.0) d_wrapped += range_max;
    SensedPath p;
    p.alpha_hat = alpha * expj(-kTwoPi * meta.subcarriers[0] * df * (d - d_wrapped) / kSpeedOfLight);
    p.d_hat_m = d_wrapped;
    p.v_hat_mps = v;
    p.power_db = linear_to_db(std::norm(alpha));
    paths.push_back(p);
  }
  return paths;
}

CrlbReport crlb(double rho, int k, int l, double subcarrier_spacing_hz, double interval_s, double carrier_freq_hz) {
  if (!(rho > 0.0) || k < 2 || l < 2 || !(subcarrier_spacing_hz > 0.0) || !(interval_s > 0.0) ||
      !(carrier_freq_hz > 0.0)) {
    throw ValidationError("crlb: need rho > 0, K >= 2, L >= 2 and positive spacings");
  }
  const double kd = static_cast<double>(k);
  const double ld = static_cast<double>(l);
  const double lambda = kSpeedOfLight / carrier_freq_hz;
  const double pi2 = kPi * kPi;
  CrlbReport r;
  r.rho = rho;
  r.k = k;
  r.l = l;
  const double fk = subcarrier_spacing_hz / kSpeedOfLight;
  const double fl = interval_s / lambda;
  r.d_crlb_m2 = 3.0 / (2.0 * rho * pi2 * fk * fk * kd * (kd * kd - 1.0) * ld);
  r.v_crlb = 3.0 / (2.0 * rho * pi2 * fl * fl * ld * (ld * ld - 1.0) * kd);
  r.theta_d = 6.0 * kd * kd / (rho * kd * ld * (kd * kd - 1.0));
  r.theta_v = 6.0 * ld * ld / (rho * kd * ld * (ld * ld - 1.0));
  r.theta_total = r.theta_d + r.theta_v;
  return r;
}

LocalizationResult localize(const std::vector<Vec3>& anchors, const std::vector<double>& ranges, int max_iterations,
                            double tolerance_m) {
  if (anchors.size() < 3 || anchors.size() != ranges.size()) {
    throw ValidationError("localize: need at least three anchors with one range each");
  }
  double cx = 0.0;
  double cy = 0.0;
  for (const Vec3& a : anchors) {
    cx += a[0];
    cy += a[1];
  }
  cx /= static_cast<double>(anchors.size());
  cy /= static_cast<double>(anchors.size());
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const Vec3& a : anchors) {
    sxx += (a[0] - cx) * (a[0] - cx);
    sxy += (a[0] - cx) * (a[1] - cy);
    syy += (a[1] - cy) * (a[1] - cy);
  }
  if (sxx * syy - sxy * sxy <= 1e-12 * (sxx + syy) * (sxx + syy)) throw ValidationError("localize: anchors are collinear");

  LocalizationResult out;
  double x = cx;
  double y = cy;
  for (int it = 1; it <= max_iterations; ++it) {
    double jtj00 = 0.0;
    double jtj01 = 0.0;
    double jtj11 = 0.0;
    double jtr0 = 0.0;
    double jtr1 = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const double dx = x - anchors[i][0];
      const double dy = y - anchors[i][1];
      const double dist = std::max(std::hypot(dx, dy), 1e-12);
      const double res = dist - ranges[i];
      const double j0 = dx / dist;
      const double j1 = dy / dist;
      jtj00 += j0 * j0;
      jtj01 += j0 * j1;
      jtj11 += j1 * j1;
      jtr0 += j0 * res;
      jtr1 += j1 * res;
    }
    const double det = jtj00 * jtj11 - jtj01 * jtj01;
    out.iterations = it;
    if (std::abs(det) < 1e-300) break;
    const double sx = -(jtj11 * jtr0 - jtj01 * jtr1) / det;
    const double sy = -(-jtj01 * jtr0 + jtj00 * jtr1) / det;
    x += sx;
    y += sy;
    if (std::hypot(sx, sy) < tolerance_m) {
      out.converged = true;
      break;
    }
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = std::hypot(x - anchors[i][0], y - anchors[i][1]) - ranges[i];
    ss += r * r;
  }
  out.position = {x, y, 0.0};
  out.residual_rms_m = std::sqrt(ss / static_cast<double>(anchors.size()));
  return out;
}

void write_range_doppler_csv(const RangeDopplerMap& map, std::ostream& out) {
  CsvWriter csv(out, {"range_m", "velocity_mps", "power_db"});
  for (std::size_t r = 0; r < map.num_range; ++r) {
    for (std::size_t p = 0; p < map.num_doppler; ++p) {
      csv.row(map.range_axis_m[r], map.velocity_axis_mps[p], map.power_db[map.index(r, p)]);
    }
  }
}

void write_detections_csv(const std::vector<Detection>& detections, std::ostream& out) {
  CsvWriter csv(out, {"range_m", "velocity_mps", "power_db", "range_bin", "doppler_bin"});
  for (const Detection& d : detections) csv.row(d.range_m, d.velocity_mps, d.power_db, d.range_bin, d.doppler_bin);
}

}  // namespace simcal
