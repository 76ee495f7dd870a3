#include <benchmark/benchmark.h>

#include "rigrecon/io.hpp"
#include "rigrecon/problem.hpp"
#include "rigrecon/synthetic.hpp"

namespace {

using namespace rigrecon;

struct Setup {
  Scenario scenario;
  CalibrationProblem problem;
  ParameterBlock truth;

  explicit Setup(const char* name)
      : scenario(generate(preset(name))),
        problem(make_problem(scenario.archive, scenario.trajectory)),
        truth(ground_truth_parameters(scenario)) {}
};

const Setup& franka() {
  static const Setup s("franka-like");
  return s;
}

const Setup& memroc() {
  static const Setup s("memroc-like");
  return s;
}

const Setup& pick(const benchmark::State& state) { return state.range(0) == 0 ? franka() : memroc(); }

void BM_TotalLoss(benchmark::State& state) {
  const Setup& s = pick(state);
  const LossEngine engine(s.problem);
  for (auto _ : state) benchmark::DoNotOptimize(engine.total_loss(s.truth).total);
}
BENCHMARK(BM_TotalLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
  const Setup& s = pick(state);
  const LossEngine engine(s.problem);
  Gradient grad;
  for (auto _ : state) benchmark::DoNotOptimize(engine.gradient(s.truth, {}, grad).total);
}
BENCHMARK(BM_Gradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Linearize(benchmark::State& state) {
  const Setup& s = pick(state);
  const LossEngine engine(s.problem);
  for (auto _ : state) benchmark::DoNotOptimize(engine.linearize(s.truth, {}).loss);
}
BENCHMARK(BM_Linearize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Initialize(benchmark::State& state) {
  const Setup& s = pick(state);
  for (auto _ : state) benchmark::DoNotOptimize(initialize(s.problem).params.extrinsics.size());
}
BENCHMARK(BM_Initialize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
  const Setup& s = pick(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve(s.scenario.archive, s.scenario.trajectory).log.final_loss);
}
BENCHMARK(BM_Solve)->Arg(0)->Arg(1)->Unit(benchmark::kSecond)->Iterations(1);

void BM_ArchiveRoundTrip(benchmark::State& state) {
  const Setup& s = pick(state);
  const auto dir = std::filesystem::temp_directory_path() / "rigrecon_bench_archive";
  for (auto _ : state) {
    write_archive(dir, s.scenario.archive);
    benchmark::DoNotOptimize(read_archive(dir).views.size());
  }
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_ArchiveRoundTrip)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
