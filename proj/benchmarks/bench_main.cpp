#include <benchmark/benchmark.h>

#include "pamlab/chaos.hpp"
#include "pamlab/feynman_kac.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/noise.hpp"
#include "pamlab/solver.hpp"

using namespace pamlab;

static void HeatKernelSpectral(benchmark::State& state) {
  const TorusSpec s = TorusSpec::unit(2);
  const int kmax = static_cast<int>(state.range(0));
  double acc = 0.0;
  for (auto _ : state) {
    acc += heat_kernel(s, kmax, 0.05, {0.1, 0.2, 0}, {0.4, 0.9, 0});
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(HeatKernelSpectral)->Arg(8)->Arg(32);

static void HeatKernelImages(benchmark::State& state) {
  const TorusSpec s = TorusSpec::unit(2);
  double acc = 0.0;
  for (auto _ : state) {
    acc += heat_kernel_images(s, 0.05, {0.1, 0.2, 0}, {0.4, 0.9, 0});
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(HeatKernelImages);

static void SolverStep(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int kmax = static_cast<int>(state.range(1));
  auto basis = std::make_shared<const SpectralBasis>(TorusSpec::unit(d), kmax);
  const NoiseParams p{0.3 * d, 1.0, 1.0};
  Stepper stepper(basis, p);
  stepper.prepare(1e-3);
  auto ws = stepper.workspace();
  NoiseSampler noise(basis, p, 1);
  std::vector<double> a = InitialCondition::uniform(1.0).coefficients(*basis);
  std::vector<double> dw(basis->size());
  std::size_t k = 0;
  for (auto _ : state) {
    noise.increment(0, k, 1e-3, dw);
    stepper.step(a, dw, 1e-3, ws, k++);
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(SolverStep)->Args({1, 32})->Args({2, 16})->Args({2, 32});

static void FeynmanKacPairs(benchmark::State& state) {
  const TorusSpec s = TorusSpec::unit(1);
  FkConfig cfg;
  cfg.pairs = static_cast<std::size_t>(state.range(0));
  cfg.dt = 1e-2;
  cfg.kmax = 8;
  cfg.threads = 1;
  const auto one = [](const Point&) { return 1.0; };
  for (auto _ : state) {
    auto c = fk_second_moment(s, NoiseParams{0.3, 1.0, 0.5}, one, 1.0, {0.5, 0, 0}, {1.0, 2.0}, cfg);
    benchmark::DoNotOptimize(c.points.back().estimate);
  }
}
BENCHMARK(FeynmanKacPairs)->Arg(1000)->Unit(benchmark::kMillisecond);

static void IteratedKernelMarch(benchmark::State& state) {
  const TorusSpec s = TorusSpec::unit(1);
  ChaosConfig cfg;
  cfg.kmax = static_cast<int>(state.range(0));
  cfg.time_nodes = 100;
  for (auto _ : state) {
    IteratedKernels k(s, NoiseParams{0.3, 1.0, 0.5}, {0.1, 0, 0}, {0.3, 0, 0}, 0.2, cfg);
    benchmark::DoNotOptimize(k.evaluate(3, k.times().size() - 1, {0.2, 0, 0}, {0.25, 0, 0}));
  }
}
BENCHMARK(IteratedKernelMarch)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
