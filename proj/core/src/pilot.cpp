#include "simcal/pilot.hpp"

#include <algorithm>

namespace simcal {

namespace {
constexpr double kUnusable = 1e-12;
}

std::vector<int> PilotMap::bs_comb(int m) const {
  std::vector<int> out(base_length);
  for (int k = 0; k < base_length; ++k) out[k] = bs_index(k, m);
  return out;
}

std::vector<int> PilotMap::ue_comb(int m, int n) const {
  std::vector<int> out(ue_length());
  for (int k = 0; k < ue_length(); ++k) out[k] = ue_index(k, m, n);
  return out;
}

PilotMap build_pilot_map(int num_trp, int num_ue, int base_length) {
  if (num_trp < 1 || num_ue < 1 || base_length < 1) throw ValidationError("build_pilot_map: sizes must be positive");
  if (base_length % num_ue != 0) {
    throw ValidationError("build_pilot_map: N = " + std::to_string(num_ue) + " does not divide K = " +
                          std::to_string(base_length));
  }
  return {num_trp, num_ue, base_length};
}

std::vector<int> srs_comb(int n, int num_ue, int base_length) {
  std::vector<int> out(base_length);
  for (int k = 0; k < base_length; ++k) out[k] = k * num_ue + n;
  return out;
}

std::size_t CombSlice::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::vector<cplx> unit_pilots(std::size_t n) { return std::vector<cplx>(n, cplx{1.0, 0.0}); }

CombSlice estimate_channel(const CombSlice& observation, const std::vector<cplx>& pilots) {
  if (pilots.size() != observation.size() || observation.values.size() != observation.size()) {
    throw ValidationError("estimate_channel: pilot and observation sizes differ");
  }
  CombSlice out = observation;
  if (out.valid.size() != out.size()) out.valid.assign(out.size(), 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::abs(pilots[i]) == 0.0) throw ValidationError("estimate_channel: zero pilot symbol");
    if (out.valid[i]) out.values[i] = observation.values[i] / pilots[i];
  }
  return out;
}

CarsSequence form_cars(const CombSlice& estimate) {
  CarsSequence cars;
  cars.subcarriers = estimate.subcarriers;
  cars.symbols.assign(estimate.size(), cplx{});
  cars.usable.assign(estimate.size(), 0);
  double inv_power = 0.0;
  std::size_t usable = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const bool present = estimate.valid.empty() || estimate.valid[i];
    const double mag = std::abs(estimate.values[i]);
    if (!present || mag < kUnusable) continue;
    cars.usable[i] = 1;
    inv_power += 1.0 / (mag * mag);
    ++usable;
  }
  if (usable == 0) return cars;
  cars.rho = 1.0 / std::sqrt(inv_power / static_cast<double>(usable));
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (!cars.usable[i]) continue;
    const cplx h = estimate.values[i];
    cars.symbols[i] = cars.rho * std::conj(h) / std::norm(h);
  }
  return cars;
}

EquivalentChannel form_equivalent_channel(const CombSlice& echo, const CarsSequence& cars, int m, int n, double time_s) {
  if (echo.size() != cars.symbols.size()) throw ValidationError("form_equivalent_channel: echo and CARS sizes differ");
  EquivalentChannel eq;
  eq.m = m;
  eq.n = n;
  eq.time_s = time_s;
  eq.values.subcarriers = echo.subcarriers;
  eq.values.values.assign(echo.size(), cplx{});
  eq.values.valid.assign(echo.size(), 0);
  for (std::size_t i = 0; i < echo.size(); ++i) {
    const bool present = echo.valid.empty() || echo.valid[i];
    if (!present || !cars.usable[i]) continue;
    eq.values.values[i] = echo.values[i] / cars.rho;
    eq.values.valid[i] = 1;
  }
  return eq;
}

}  // namespace simcal
