#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/levy.hpp"
#include "rbdsde/reflection.hpp"
#include "rbdsde/rng.hpp"
#include "rbdsde/scenario_tree.hpp"
#include "rbdsde/simulate.hpp"
#include "rbdsde/solver.hpp"

using namespace rbdsde;

namespace {

LevyMeasure wide_measure(int atoms) {
    std::vector<LevyAtom> list;
    for (int j = 0; j < atoms; ++j)
        list.push_back({0.5 + 0.4 * j, 1.0 / (1.0 + j)});
    return LevyMeasure(list);
}

struct Problem {
    LevyMeasure measure;
    TeugelsBasis basis;
    ScenarioTree tree;
    Barrier barrier;
    DriverPair drivers;

    Problem(int N, int P)
        : measure({{1.0, 1.0}}),
          basis(teugels_basis(measure)),
          tree(build_tree(measure, basis, 1.0, N, P, 42)),
          barrier(make_barrier(
              [] {
                  BarrierSpec spec;
                  spec.family = BarrierFamily::Linear;
                  spec.c0 = 1.0;
                  spec.c1 = -1.0;
                  return spec;
              }(),
              tree)),
          drivers(DriverSpec{}, DriverSpec{}) {}
};

void bench_basis(benchmark::State& state) {
    LevyMeasure measure = wide_measure(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        TeugelsBasis basis = teugels_basis(measure);
        benchmark::DoNotOptimize(basis.alpha(0, 0));
    }
}
BENCHMARK(bench_basis)->Arg(2)->Arg(4)->Arg(6);

void bench_tree_build(benchmark::State& state) {
    LevyMeasure measure({{1.0, 1.0}, {-0.5, 2.0}});
    TeugelsBasis basis = teugels_basis(measure);
    for (auto _ : state) {
        ScenarioTree tree = build_tree(measure, basis, 1.0, static_cast<int>(state.range(0)), 20, 42);
        benchmark::DoNotOptimize(tree.total_nodes());
    }
}
BENCHMARK(bench_tree_build)->Arg(25)->Arg(50);

void bench_projection(benchmark::State& state) {
    LevyMeasure measure({{1.0, 1.0}, {-0.5, 2.0}, {2.0, 0.25}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 8, 1, 7);
    std::vector<double> next(static_cast<std::size_t>(tree.law().num_outcomes));
    RandomStream stream(5, 0);
    for (double& v : next) v = stream.next_uniform();
    for (auto _ : state) {
        Projection proj = project_Z(tree, next);
        benchmark::DoNotOptimize(proj.residual);
    }
}
BENCHMARK(bench_projection);

void bench_solve(benchmark::State& state) {
    Problem prob(50, 20);
    for (auto _ : state) {
        SolutionTriple sol =
            solve_penalized(prob.tree, prob.drivers, prob.barrier, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(sol.y[0].v[0]);
    }
}
BENCHMARK(bench_solve)->Arg(64)->Arg(256)->Arg(1024);

void bench_sweep(benchmark::State& state) {
    Problem prob(50, 20);
    std::vector<int> schedule;
    for (int n = 1; n <= 256; n *= 2) schedule.push_back(n);
    for (auto _ : state) {
        ConvergenceReport report =
            penalization_sweep(prob.tree, prob.drivers, prob.barrier, schedule);
        benchmark::DoNotOptimize(report.rows.back().violation);
    }
}
BENCHMARK(bench_sweep);

void bench_oracle(benchmark::State& state) {
    Problem prob(50, 20);
    for (auto _ : state) {
        SolutionTriple sol = snell_oracle(prob.tree, prob.drivers, prob.barrier);
        benchmark::DoNotOptimize(sol.y[0].v[0]);
    }
}
BENCHMARK(bench_oracle);

void bench_simulate(benchmark::State& state) {
    LevyMeasure measure({{1.0, 1.0}, {-1.0, 1.0}});
    std::uint64_t p = 0;
    for (auto _ : state) {
        RandomStream stream(777, p++);
        std::vector<LevyPathEvent> events = simulate_levy_path(measure, 1.0, stream);
        benchmark::DoNotOptimize(events.size());
    }
}
BENCHMARK(bench_simulate);

} // namespace

BENCHMARK_MAIN();
