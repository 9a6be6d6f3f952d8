// Serial reference loops vs OpenMP kernels. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cqg/dynamics.hpp"
#include "cqg/exchange.hpp"
#include "cqg/geometry.hpp"
#include "cqg/spin.hpp"
#include "cqg/statistics.hpp"
#include "cqg/stencil.hpp"

using namespace cqg;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

ChartPtr box() {
  static const ChartPtr c = MetricChart::euclidean({Axis{"x", -4, 4, 96, Boundary::open},
                                                    Axis{"y", -4, 4, 96, Boundary::open},
                                                    Axis{"z", 0, 6.283185307179586, 32, Boundary::periodic}});
  return c;
}

ScalarField blob() {
  return ScalarField::sample(box(), [](std::span<const double> q) {
    return std::exp(-0.5 * (q[0] * q[0] + q[1] * q[1])) * (1.2 + std::sin(q[2]));
  });
}

void BM_derivative(benchmark::State& st) {
  const auto f = blob();
  std::vector<double> out(f.size());
  for (auto _ : st) {
    if (st.range(0))
      kernels::derivative(*box(), f.values, 0, 0.0, out, Exec::parallel);
    else
      kernels::reference::derivative(*box(), f.values, 0, 0.0, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_filter(benchmark::State& st) {
  const auto f = blob();
  std::vector<double> out(f.size());
  for (auto _ : st) {
    if (st.range(0))
      kernels::filter(*box(), f.values, 1, 0.0, 1.0 / 64, out, Exec::parallel);
    else
      kernels::reference::filter(*box(), f.values, 1, 0.0, 1.0 / 64, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_laplace_beltrami(benchmark::State& st) {
  const auto f = blob();
  for (auto _ : st) benchmark::DoNotOptimize(laplace_beltrami(f, {}, exec_of(st)));
}

void BM_weyl_curvature(benchmark::State& st) {
  const auto f = blob();
  WeylOptions o;
  o.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(weyl_curvature(f, o));
}

void BM_coupled_step(benchmark::State& st) {
  const auto c = MetricChart::euclidean({Axis{"x", -6, 6, 512, Boundary::open}, Axis{"y", 0, 1, 1, Boundary::periodic},
                                         Axis{"z", 0, 1, 1, Boundary::periodic}});
  const auto rho = ScalarField::sample(c, [](std::span<const double> q) { return std::exp(-2.0 * q[0] * q[0]); });
  SolverParams p;
  p.dt = 0.45 * c->min_spacing() * c->min_spacing();
  p.exec = exec_of(st);
  CqgStepper s(make_state(rho, ScalarField(c, 0.0)), {}, p);
  for (auto _ : st) s.step();
}

void BM_symmetrize(benchmark::State& st) {
  std::vector<SpinorState> f;
  std::uint64_t rng = 7;
  for (int k = 0; k < 5; ++k) {
    SpinorState s{SpinValue{3}, 2, {}};
    for (int i = 0; i < 8; ++i) s.values.emplace_back(uniform01(rng), uniform01(rng));
    f.push_back(s);
  }
  for (auto _ : st) benchmark::DoNotOptimize(symmetrize(f, exec_of(st)));
}

void BM_exchange_census(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(exchange_census(32, {}, exec_of(st)));
}

void BM_ratchet(benchmark::State& st) {
  const SpinValue s{3};
  const auto grid = ratchet_grid(s, 1000, 1000);
  for (auto _ : st) benchmark::DoNotOptimize(ratchet_check(grid, s, {}, exec_of(st)));
}

}  // namespace

BENCHMARK(BM_derivative)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_filter)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_laplace_beltrami)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weyl_curvature)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_coupled_step)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_symmetrize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_exchange_census)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ratchet)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
