#pragma once

#include <cstdint>
#include <vector>

#include "simcal/common.hpp"

namespace simcal {

/// Orthogonal comb mapping of the bidirectional calibration frame. TRP m sends CSI-RS on
/// k*M + m (k < K); UE n answers TRP m with CARS on k*M*N + n*M + m (k < K/N).
/// Comb indices are 0-based.
struct PilotMap {
  int num_trp = 1;
  int num_ue = 1;
  int base_length = 1;  // K

  int bs_index(int k, int m) const { return k * num_trp + m; }
  int ue_index(int k, int m, int n) const { return k * num_trp * num_ue + n * num_trp + m; }
  int ue_length() const { return base_length / num_ue; }

  std::vector<int> bs_comb(int m) const;
  std::vector<int> ue_comb(int m, int n) const;
};

/// Throws ValidationError unless N divides K and all sizes are positive.
PilotMap build_pilot_map(int num_trp, int num_ue, int base_length);

/// SRS comb of UE n for sensing and tracking: k*N + n for k < K.
std::vector<int> srs_comb(int n, int num_ue, int base_length);

/// Channel estimate restricted to a comb. Entries with valid == 0 are absent.
struct CombSlice {
  std::vector<int> subcarriers;
  std::vector<cplx> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return subcarriers.size(); }
  std::size_t valid_count() const;
};

/// Least-squares per-subcarrier estimate y / p. Absent observations stay absent.
/// Throws ValidationError on a zero pilot or on size mismatch.
CombSlice estimate_channel(const CombSlice& observation, const std::vector<cplx>& pilots);

/// All-ones base pilot sequence.
std::vector<cplx> unit_pilots(std::size_t n);

/// Conjugate-precoded calibration reference signal. symbol = rho * conj(h) / |h|^2 with
/// rho = 1 / sqrt(mean(1 / |h|^2)) over usable entries, so mean transmit power is 1 and a
/// unit-modulus estimate yields conj(h). Entries with |h| < 1e-12 are unusable and send 0.
struct CarsSequence {
  std::vector<int> subcarriers;
  std::vector<cplx> symbols;
  std::vector<std::uint8_t> usable;
  double rho = 1.0;  // signalled to the receiver alongside the echo
};

CarsSequence form_cars(const CombSlice& estimate);

/// Equivalent round-trip channel of one (m, n) link, diagonal m' = m only.
struct EquivalentChannel {
  int m = 0;
  int n = 0;
  double time_s = 0.0;  // centre of the round trip
  CombSlice values;
};

/// Divides the received echo by the signalled CARS scale. Subcarriers that were unusable
/// at the transmitter or absent in the echo are marked absent.
EquivalentChannel form_equivalent_channel(const CombSlice& echo, const CarsSequence& cars, int m, int n, double time_s);

}  // namespace simcal
