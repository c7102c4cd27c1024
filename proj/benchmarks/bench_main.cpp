#include <benchmark/benchmark.h>

#include "qse/harness.hpp"
#include "qse/offline.hpp"
#include "qse/oracle.hpp"

using namespace qse;

namespace {

MarkovGame bench_game(int states, int horizon) {
  return make_random_game({states, 2, 2, horizon}, 0.0, 1.0, 12345);
}

LeaderPolicy bench_policy(const GameDims& dims) {
  return LeaderPolicy::uniform(dims);
}

}  // namespace

static void QuantalResponse(benchmark::State& state) {
  MarkovGame game = bench_game(static_cast<int>(state.range(0)), 5);
  LeaderPolicy pi = bench_policy(game.dims());
  for (auto _ : state) {
    FollowerSolution sol = quantal_response(game, pi);
    benchmark::DoNotOptimize(sol.Nu.back()(0, 0));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(QuantalResponse)->RangeMultiplier(2)->Range(2, 32)->Complexity();

static void SolveQseMyopic(benchmark::State& state) {
  MarkovGame game = bench_game(2, 2);
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    QseSolution sol = solve_qse_myopic(game, grid);
    benchmark::DoNotOptimize(sol.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(SolveQseMyopic)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void FitMle(benchmark::State& state) {
  GameDims dims{2, 2, 2, 2};
  RandomLinearSpec spec{dims, 4, 0.0, 1.0, 1.0};
  LinearGame lg = make_random_linear_game(spec, 7);
  Dataset data = generate_offline_dataset(
      lg.game, uniform_deterministic_sampler(dims), static_cast<int>(state.range(0)), 8);
  ChoiceData slice = choice_slice(data, lg.params, dims, 0, 1.0);
  for (auto _ : state) {
    FitResult fit = fit_mle_myopic(slice, lg.params.param_bound);
    benchmark::DoNotOptimize(fit.nll);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(FitMle)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

static void PrescriptionScan(benchmark::State& state) {
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, static_cast<int>(state.range(0)));
  Eigen::MatrixXd value(2, 2), reward(2, 2);
  value << 0.4, 0.9, 0.1, 0.7;
  reward << 0.2, 0.8, 0.5, 0.3;
  for (auto _ : state) {
    ArgmaxResult res = prescription_argmax(value, {reward}, 1.0,
                                           InnerAggregate::Max, grid);
    benchmark::DoNotOptimize(res.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PrescriptionScan)->RangeMultiplier(2)->Range(8, 128)->Complexity();

BENCHMARK_MAIN();
