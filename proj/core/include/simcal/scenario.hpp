#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simcal/common.hpp"

namespace simcal {

using Vec3 = std::array<double, 3>;

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

/// Point scatterer. Each one adds a two-hop path tx -> scatterer -> rx to every link.
struct Scatterer {
  Vec3 position_m{};
  Vec3 velocity_mps{};
  double gain_db = -20.0;  // reflection gain relative to free-space over the two-hop length
};

struct Geometry {
  std::vector<Vec3> trp_positions_m;
  std::vector<Vec3> trp_velocities_mps;  // empty: static TRPs
  // Explicit UE placement; when empty the UEs are dropped at random inside ue_region.
  std::vector<Vec3> ue_positions_m;
  std::vector<Vec3> ue_velocities_mps;
  Vec3 ue_region_center_m{};
  double ue_region_radius_m = 0.0;
  Bounds ue_speed_mps{};
  std::vector<Scatterer> scatterers;
};

/// Symbol positions are in units of the symbol interval T and may be fractional, so a
/// round trip that completes within one TDD pattern can be placed between two snapshots.
struct PilotSchedule {
  std::vector<double> cars_symbols;  // centre times of each CSI-RS/CARS round trip
  double cars_turnaround_s = 0.0;    // CSI-RS at centre - turnaround/2, CARS at centre + turnaround/2
  int sensing_symbols = 0;           // one-way SRS snapshots used for sensing (spacing T)
  int tracking_patterns = 0;         // TDD patterns tracked after the last calibration
  int num_eval_subcarriers = 0;      // subcarriers on which precoding is evaluated
};

/// Fully resolved experiment description. All quantities are SI; frequency offsets are
/// dimensionless (ppb * 1e-9), timing offsets are seconds.
struct ScenarioConfig {
  double carrier_freq_hz = 26e9;
  double subcarrier_spacing_hz = 120e3;
  int num_subcarriers = 256;  // K, base sequence length of each TRP comb
  int num_symbols = 64;       // L
  double symbol_interval_s = 0.625e-3;  // T
  int fft_size = 2048;
  int cp_length = 144;  // metadata only
  int num_trp = 8;
  int num_ue = 8;
  int num_calib_ue = 4;
  double tx_power_dbm = 30.0;
  double noise_psd_dbm_hz = -174.0;
  double bandwidth_hz = 200e6;
  int antennas_per_aau = 16;  // metadata; array gain enters only through array_gain_db
  double array_gain_db = 0.0;
  bool noiseless = false;

  double rf_amp_sigma = 0.1;
  double rf_amp_min = 0.1;
  Bounds rf_phase_rad{-kPi, kPi};
  Bounds tau_s{-10e-9, 10e-9};
  Bounds e{-30e-9, 30e-9};

  Geometry geometry;
  PilotSchedule pilots;

  std::uint64_t seed = 0;
  int drops = 1;

  double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
};

/// Per-node transceiver impairments. Quasi-static: constant over a run.
struct NodeImpairment {
  cplx beta_t{1.0, 0.0};
  cplx beta_r{1.0, 0.0};
  double tau_s = 0.0;
  double e = 0.0;
};

/// Impairments for all nodes, TRPs and UEs kept in separate ascending arrays.
struct ImpairmentMap {
  std::vector<NodeImpairment> trp;
  std::vector<NodeImpairment> ue;
};

/// Node positions and velocities for one drop.
struct DropGeometry {
  std::vector<Vec3> trp_positions_m;
  std::vector<Vec3> trp_velocities_mps;
  std::vector<Vec3> ue_positions_m;
  std::vector<Vec3> ue_velocities_mps;
};

/// Parses and validates a configuration document (JSON text). Throws ConfigError with the
/// offending field path for schema violations and ValidationError for inconsistent values.
ScenarioConfig load_scenario(std::string_view text);
ScenarioConfig load_scenario_file(const std::string& path);

/// Serializes a config back into the schema (ppb/ns units as in the document).
std::string dump_scenario(const ScenarioConfig& cfg);

/// Re-checks every invariant; load_scenario calls this after resolving defaults.
void validate(const ScenarioConfig& cfg);

/// Draw order: TRPs ascending, then UEs ascending; per node beta_t, beta_r, tau, e, where
/// each beta consumes one normal (amplitude) then one uniform (phase).
ImpairmentMap draw_impairments(const ScenarioConfig& cfg, std::uint64_t drop = 0);

/// Explicit positions are returned as given. Random UEs: per UE, radius fraction, angle,
/// speed, heading (four uniforms, UEs ascending), placed uniformly over the region disk.
DropGeometry draw_geometry(const ScenarioConfig& cfg, std::uint64_t drop = 0);

/// Table-I scenario with desk-scale defaults (K = 256, L = 64) and the default deployment.
ScenarioConfig table1_scenario();

}  // namespace simcal
