#include <benchmark/benchmark.h>

#include "simcal/calibration.hpp"
#include "simcal/hermitian_eigen.hpp"
#include "simcal/rng.hpp"
#include "simcal/scenario.hpp"
#include "simcal/scene.hpp"
#include "simcal/sensing.hpp"

using namespace simcal;

namespace {

CombSlice delayed_comb(int size, int stride, double tau_s, double df) {
  Rng rng(7, Stream::monte_carlo);
  CombSlice s;
  for (int i = 0; i < size; ++i) {
    const int k = i * stride;
    s.subcarriers.push_back(k);
    s.values.push_back(expj(-2.0 * kTwoPi * k * df * tau_s) + rng.complex_normal(1e-2));
    s.valid.push_back(1);
  }
  return s;
}

Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols) {
  Rng rng(9, Stream::monte_carlo);
  Eigen::MatrixXcd c(rows, cols);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.complex_normal(1.0);
  return c;
}

}  // namespace

static void BM_MlDelay(benchmark::State& state) {
  const CombSlice comb = delayed_comb(static_cast<int>(state.range(0)), 32, 3.3e-9, 120e3);
  for (auto _ : state) benchmark::DoNotOptimize(ml_delay_coeff(comb, 120e3));
}
BENCHMARK(BM_MlDelay)->Arg(64)->Arg(256);

static void BM_TlsJoint(benchmark::State& state) {
  const Eigen::MatrixXcd c = random_matrix(state.range(1), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tls_joint(c));
}
BENCHMARK(BM_TlsJoint)->Args({8, 4})->Args({32, 8});

static void BM_SmallestEigenpair(benchmark::State& state) {
  const Eigen::MatrixXcd x = random_matrix(state.range(0), state.range(0));
  const Eigen::MatrixXcd a = x.adjoint() * x;
  for (auto _ : state) benchmark::DoNotOptimize(smallest_eigenpair(a));
}
BENCHMARK(BM_SmallestEigenpair)->Arg(16)->Arg(64);

static void BM_RangeDoppler(benchmark::State& state) {
  const ScenarioConfig cfg = table1_scenario();
  std::vector<int> ks;
  std::vector<double> ts;
  for (int k = 0; k < state.range(0); ++k) ks.push_back(8 * k);
  for (int l = 0; l < 64; ++l) ts.push_back(l * cfg.symbol_interval_s);
  LinkGrid grid;
  grid.meta = ChannelMeta::grid(cfg, ks, ts);
  Rng rng(3, Stream::monte_carlo);
  for (std::size_t i = 0; i < ks.size() * ts.size(); ++i) grid.values.push_back(rng.complex_normal(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(range_doppler(grid, Window::hann));
}
BENCHMARK(BM_RangeDoppler)->Arg(256);

static void BM_QuasiStaticDrop(benchmark::State& state) {
  const ScenarioConfig cfg = table1_scenario();
  std::uint64_t d = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_quasi_static_drop(cfg, d++, PrecoderKind::zf));
}
BENCHMARK(BM_QuasiStaticDrop)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
