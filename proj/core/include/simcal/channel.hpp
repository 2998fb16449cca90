#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "simcal/common.hpp"
#include "simcal/rng.hpp"
#include "simcal/scenario.hpp"

namespace simcal {

/// One propagation path: complex gain, path length, radial velocity.
struct Path {
  cplx alpha{1.0, 0.0};
  double d_m = 0.0;
  double v_mps = 0.0;
};

struct LinkPathSet {
  int m = 0;  // TRP
  int n = 0;  // UE
  std::vector<Path> paths;
};

enum class Direction { ota, ul, dl };

const char* direction_name(Direction d);

/// Sampling grid of a tensor. Subcarrier indices are absolute (relative to the band edge)
/// and sample times are absolute seconds, so comb subsets and fractional-symbol pilots
/// share one representation. The uniform case is subcarriers 0..K-1, times l*T.
struct ChannelMeta {
  double subcarrier_spacing_hz = 0.0;
  double carrier_freq_hz = 0.0;
  std::vector<int> subcarriers;
  std::vector<double> times_s;

  std::size_t num_k() const { return subcarriers.size(); }
  std::size_t num_t() const { return times_s.size(); }

  static ChannelMeta uniform(const ScenarioConfig& cfg);
  static ChannelMeta grid(const ScenarioConfig& cfg, std::vector<int> subcarriers, std::vector<double> times_s);
};

/// Complex samples indexed (m, n, k, l), row-major with l fastest.
class ChannelTensor {
 public:
  ChannelTensor() = default;
  ChannelTensor(Direction direction, int num_trp, int num_ue, ChannelMeta meta);

  Direction direction() const { return direction_; }
  int num_trp() const { return num_trp_; }
  int num_ue() const { return num_ue_; }
  const ChannelMeta& meta() const { return meta_; }

  std::size_t index(int m, int n, std::size_t k, std::size_t l) const {
    return ((static_cast<std::size_t>(m) * num_ue_ + n) * meta_.num_k() + k) * meta_.num_t() + l;
  }
  cplx& at(int m, int n, std::size_t k, std::size_t l) { return values_[index(m, n, k, l)]; }
  const cplx& at(int m, int n, std::size_t k, std::size_t l) const { return values_[index(m, n, k, l)]; }

  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }

  /// Samples of link (m, n) as a K x L block (l fastest).
  std::vector<cplx> link(int m, int n) const;

  bool all_finite() const;

 private:
  Direction direction_ = Direction::ota;
  int num_trp_ = 0;
  int num_ue_ = 0;
  ChannelMeta meta_;
  std::vector<cplx> values_;
};

/// H(k, t) = sum_q alpha_q exp(-j 2 pi k df d_q / c) exp(j 2 pi (v_q / c) fc t)
cplx ota_sample(const LinkPathSet& link, int k, double t, double df, double fc);

/// OTA tensor for every link in `links`; links must cover the num_trp x num_ue grid.
ChannelTensor generate_ota(const std::vector<LinkPathSet>& links, int num_trp, int num_ue, const ChannelMeta& meta);

/// Multiplicative impairment for a tx -> rx hop:
/// beta_rx^r beta_tx^t exp(-j 2 pi k df (tau_tx - tau_rx)) exp(j 2 pi (e_tx - e_rx) fc t).
cplx impairment_factor(const NodeImpairment& tx, const NodeImpairment& rx, int k, double t, double df, double fc);

/// UL: tx = UE n, rx = TRP m. DL: tx = TRP m, rx = UE n. Both tensors stay indexed (m, n).
ChannelTensor apply_impairments(const ChannelTensor& ota, const ImpairmentMap& imp, Direction direction);

/// Per-subcarrier noise power in dBm: psd + 10 log10(df).
double noise_power_dbm(const ScenarioConfig& cfg);

/// Per-subcarrier transmit power in dBm for a transmitter spreading tx_power over the band.
double subcarrier_power_dbm(const ScenarioConfig& cfg);

/// Noise variance relative to a unit-amplitude transmitted symbol; zero when noiseless.
double noise_variance(const ScenarioConfig& cfg);

/// Adds CN(0, variance) to every sample in storage order. variance <= 0 is a no-op.
ChannelTensor add_noise(const ChannelTensor& ch, double variance, Rng& rng);
ChannelTensor add_noise(const ChannelTensor& ch, const ScenarioConfig& cfg, Rng& rng);

/// LOS path per link plus one two-hop path per scatterer. Gains carry the free-space
/// amplitude lambda / (4 pi d) and the carrier phase exp(-j 2 pi fc d / c); v is the range rate.
std::vector<LinkPathSet> build_paths(const ScenarioConfig& cfg, const DropGeometry& geo);

/// Ground-truth reciprocity coefficient C = G / H of link (m, n).
cplx true_coefficient(const ImpairmentMap& imp, int m, int n, int k, double t, double df, double fc);

/// Node factors with C(m, n) = ue_factor(n) / bs_factor(m):
/// (beta^t / beta^r) exp(-j 4 pi k df tau) exp(j 4 pi e fc t).
cplx node_factor(const NodeImpairment& node, int k, double t, double df, double fc);

/// Writes columns m,n,k,l,re,im,direction with one header line.
void write_channel_csv(const ChannelTensor& ch, std::ostream& out);

}  // namespace simcal
