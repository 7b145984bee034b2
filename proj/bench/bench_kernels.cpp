// Serial reference vs OpenMP path for each parallel kernel. Arg 0 = serial,
// 1 = parallel.

#include <benchmark/benchmark.h>

#include "stf/ci_engine.hpp"
#include "stf/coulomb.hpp"
#include "stf/grid_oracle.hpp"
#include "stf/noise_dynamics.hpp"
#include "stf/protocol_sim.hpp"

using namespace stf;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel (" + std::to_string(max_threads()) + " threads)");
}

void BM_CoulombTable(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(CoulombTable::build(6, {}, exec_of(state)));
  label(state);
}

void BM_AssembleBlocks(benchmark::State& state) {
  const auto table = coulomb_table(6);
  const auto basis = make_basis(Sector::Symmetric, 6, Geometry{}, Material{});
  for (auto _ : state) benchmark::DoNotOptimize(assemble_blocks(basis, *table, exec_of(state)));
  label(state);
}

void BM_GridOracle(benchmark::State& state) {
  GridOracleOptions opt;
  opt.exec = exec_of(state);
  Geometry g;
  g.side_length = 50.0;
  for (auto _ : state) benchmark::DoNotOptimize(grid_oracle_spectrum(g, Material{}, 10, 1, Sector::Symmetric, opt));
  label(state);
}

void BM_NoiseEnsemble(benchmark::State& state) {
  const auto p = EffectiveParams::from_delta_j(0.0, 2.11e-2, -5.05e-3);
  NoiseConfig c;
  c.E_hf = 0.388;
  c.samples = 500;
  c.exec = exec_of(state);
  std::vector<double> t(101);
  for (int k = 0; k < 101; ++k) t[k] = 2.0 * t_star(p) * k / 100.0;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_filter_curve(p, c, t));
  label(state);
}

void BM_LindbladEnsemble(benchmark::State& state) {
  const auto p = EffectiveParams::from_delta_j(0.0, 2.11e-2, -5.05e-3);
  NoiseConfig c;
  c.E_hf = 0.388;
  c.dephasing_rate = 0.01;
  c.samples = 20;
  c.exec = exec_of(state);
  std::vector<double> t(11);
  for (int k = 0; k < 11; ++k) t[k] = t_star(p) * k / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_filter_curve(p, c, t));
  label(state);
}

void BM_ChainTrials(benchmark::State& state) {
  ChainConfig c;
  c.n_dots = 3;
  c.trials = 5000;
  c.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_swap_chain(c));
  label(state);
}

}  // namespace

BENCHMARK(BM_CoulombTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleBlocks)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NoiseEnsemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LindbladEnsemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChainTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
