#include "simcal/channel.hpp"

#include <ostream>

#include "simcal/csv.hpp"

namespace simcal {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::ota:
      return "OTA";
    case Direction::ul:
      return "UL";
    case Direction::dl:
      return "DL";
  }
  return "?";
}

ChannelMeta ChannelMeta::uniform(const ScenarioConfig& cfg) {
  std::vector<int> ks(cfg.num_subcarriers);
  for (int k = 0; k < cfg.num_subcarriers; ++k) ks[k] = k;
  std::vector<double> ts(cfg.num_symbols);
  for (int l = 0; l < cfg.num_symbols; ++l) ts[l] = l * cfg.symbol_interval_s;
  return grid(cfg, std::move(ks), std::move(ts));
}

ChannelMeta ChannelMeta::grid(const ScenarioConfig& cfg, std::vector<int> subcarriers, std::vector<double> times_s) {
  ChannelMeta meta;
  meta.subcarrier_spacing_hz = cfg.subcarrier_spacing_hz;
  meta.carrier_freq_hz = cfg.carrier_freq_hz;
  meta.subcarriers = std::move(subcarriers);
  meta.times_s = std::move(times_s);
  return meta;
}

ChannelTensor::ChannelTensor(Direction direction, int num_trp, int num_ue, ChannelMeta meta)
    : direction_(direction), num_trp_(num_trp), num_ue_(num_ue), meta_(std::move(meta)) {
  values_.assign(static_cast<std::size_t>(num_trp) * num_ue * meta_.num_k() * meta_.num_t(), cplx{});
}

std::vector<cplx> ChannelTensor::link(int m, int n) const {
  const std::size_t count = meta_.num_k() * meta_.num_t();
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(index(m, n, 0, 0));
  return {first, first + static_cast<std::ptrdiff_t>(count)};
}

bool ChannelTensor::all_finite() const {
  for (const cplx& v : values_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

cplx ota_sample(const LinkPathSet& link, int k, double t, double df, double fc) {
  cplx sum{};
  for (const Path& p : link.paths) {
    const double phase = -kTwoPi * k * df * p.d_m / kSpeedOfLight + kTwoPi * (p.v_mps / kSpeedOfLight) * fc * t;
    sum += p.alpha * expj(phase);
  }
  return sum;
}

ChannelTensor generate_ota(const std::vector<LinkPathSet>& links, int num_trp, int num_ue, const ChannelMeta& meta) {
  ChannelTensor out(Direction::ota, num_trp, num_ue, meta);
  for (const LinkPathSet& link : links) {
    if (link.m < 0 || link.m >= num_trp || link.n < 0 || link.n >= num_ue) {
      throw ValidationError("generate_ota: link index out of range");
    }
    for (const Path& p : link.paths) {
      if (p.d_m < 0.0) throw ValidationError("generate_ota: negative path length");
    }
    for (std::size_t k = 0; k < meta.num_k(); ++k) {
      for (std::size_t l = 0; l < meta.num_t(); ++l) {
        out.at(link.m, link.n, k, l) = ota_sample(link, meta.subcarriers[k], meta.times_s[l],
                                                  meta.subcarrier_spacing_hz, meta.carrier_freq_hz);
      }
    }
  }
  return out;
}

cplx impairment_factor(const NodeImpairment& tx, const NodeImpairment& rx, int k, double t, double df, double fc) {
  const double phase = -kTwoPi * k * df * (tx.tau_s - rx.tau_s) + kTwoPi * (tx.e - rx.e) * fc * t;
  return rx.beta_r * tx.beta_t * expj(phase);
}

ChannelTensor apply_impairments(const ChannelTensor& ota, const ImpairmentMap& imp, Direction direction) {
  if (ota.direction() != Direction::ota) throw ValidationError("apply_impairments: input must be an OTA tensor");
  if (direction == Direction::ota) throw ValidationError("apply_impairments: target direction must be UL or DL");
  if (static_cast<int>(imp.trp.size()) < ota.num_trp() || static_cast<int>(imp.ue.size()) < ota.num_ue()) {
    throw ValidationError("apply_impairments: impairment map smaller than tensor");
  }
  const ChannelMeta& meta = ota.meta();
  ChannelTensor out(direction, ota.num_trp(), ota.num_ue(), meta);
  for (int m = 0; m < ota.num_trp(); ++m) {
    for (int n = 0; n < ota.num_ue(); ++n) {
      const NodeImpairment& tx = direction == Direction::ul ? imp.ue[n] : imp.trp[m];
      const NodeImpairment& rx = direction == Direction::ul ? imp.trp[m] : imp.ue[n];
      for (std::size_t k = 0; k < meta.num_k(); ++k) {
        for (std::size_t l = 0; l < meta.num_t(); ++l) {
          out.at(m, n, k, l) = ota.at(m, n, k, l) * impairment_factor(tx, rx, meta.subcarriers[k], meta.times_s[l],
                                                                      meta.subcarrier_spacing_hz, meta.carrier_freq_hz);
        }
      }
    }
  }
  return out;
}

double noise_power_dbm(const ScenarioConfig& cfg) {
  return cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.subcarrier_spacing_hz);
}

double subcarrier_power_dbm(const ScenarioConfig& cfg) {
  return cfg.tx_power_dbm - 10.0 * std::log10(cfg.bandwidth_hz / cfg.subcarrier_spacing_hz) + cfg.array_gain_db;
}

double noise_variance(const ScenarioConfig& cfg) {
  if (cfg.noiseless || !std::isfinite(cfg.noise_psd_dbm_hz)) return 0.0;
  return db_to_linear(noise_power_dbm(cfg) - subcarrier_power_dbm(cfg));
}

ChannelTensor add_noise(const ChannelTensor& ch, double variance, Rng& rng) {
  ChannelTensor out = ch;
  if (variance <= 0.0) return out;
  for (cplx& v : out.values()) v += rng.complex_normal(variance);
  return out;
}

ChannelTensor add_noise(const ChannelTensor& ch, const ScenarioConfig& cfg, Rng& rng) {
  return add_noise(ch, noise_variance(cfg), rng);
}

namespace {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// d/dt |a - b| for points moving at va, vb.
double range_rate(const Vec3& a, const Vec3& va, const Vec3& b, const Vec3& vb) {
  const double d = distance(a, b);
  if (d == 0.0) return 0.0;
  double dot = 0.0;
  for (int i = 0; i < 3; ++i) dot += (a[i] - b[i]) * (va[i] - vb[i]);
  return dot / d;
}

cplx free_space_gain(double d, double wavelength, double fc) {
  const double amp = wavelength / (4.0 * kPi * std::max(d, 1.0));
  return amp * expj(-kTwoPi * fc * d / kSpeedOfLight);
}

}  // namespace

std::vector<LinkPathSet> build_paths(const ScenarioConfig& cfg, const DropGeometry& geo) {
  const double lambda = cfg.wavelength_m();
  const double fc = cfg.carrier_freq_hz;
  std::vector<LinkPathSet> links;
  links.reserve(geo.trp_positions_m.size() * geo.ue_positions_m.size());
  for (std::size_t m = 0; m < geo.trp_positions_m.size(); ++m) {
    for (std::size_t n = 0; n < geo.ue_positions_m.size(); ++n) {
      const Vec3& pt = geo.trp_positions_m[m];
      const Vec3& vt = geo.trp_velocities_mps[m];
      const Vec3& pu = geo.ue_positions_m[n];
      const Vec3& vu = geo.ue_velocities_mps[n];
      LinkPathSet link;
      link.m = static_cast<int>(m);
      link.n = static_cast<int>(n);
      const double d = distance(pt, pu);
      link.paths.push_back({free_space_gain(d, lambda, fc), d, range_rate(pu, vu, pt, vt)});
      for (const Scatterer& s : cfg.geometry.scatterers) {
        const double d1 = distance(pu, s.position_m);
        const double d2 = distance(s.position_m, pt);
        const double v = range_rate(pu, vu, s.position_m, s.velocity_mps) +
                         range_rate(s.position_m, s.velocity_mps, pt, vt);
        const cplx g = free_space_gain(d1 + d2, lambda, fc) * std::pow(10.0, s.gain_db / 20.0);
        link.paths.push_back({g, d1 + d2, v});
      }
      links.push_back(std::move(link));
    }
  }
  return links;
}

cplx node_factor(const NodeImpairment& node, int k, double t, double df, double fc) {
  const double phase = -2.0 * kTwoPi * k * df * node.tau_s + 2.0 * kTwoPi * node.e * fc * t;
  return node.beta_t / node.beta_r * expj(phase);
}

cplx true_coefficient(const ImpairmentMap& imp, int m, int n, int k, double t, double df, double fc) {
  return node_factor(imp.ue[n], k, t, df, fc) / node_factor(imp.trp[m], k, t, df, fc);
}

void write_channel_csv(const ChannelTensor& ch, std::ostream& out) {
  CsvWriter csv(out, {"m", "n", "k", "l", "re", "im", "direction"});
  const ChannelMeta& meta = ch.meta();
  for (int m = 0; m < ch.num_trp(); ++m) {
    for (int n = 0; n < ch.num_ue(); ++n) {
      for (std::size_t k = 0; k < meta.num_k(); ++k) {
        for (std::size_t l = 0; l < meta.num_t(); ++l) {
          const cplx v = ch.at(m, n, k, l);
          csv.row(m, n, meta.subcarriers[k], l, v.real(), v.imag(), direction_name(ch.direction()));
        }
      }
    }
  }
}

}  // namespace simcal
