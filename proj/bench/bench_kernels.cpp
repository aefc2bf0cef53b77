// Serial reference vs OpenMP variants of the per-node grid kernels.
// Arguments: particles per node; the grid has 101 nodes on [-3, 3].

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cpvi/kernels.hpp"
#include "cpvi/problems.hpp"
#include "cpvi/quadrature.hpp"

using namespace cpvi;

namespace {

struct Fixture {
    ControlProblem prob = double_well(1.0, 0.3, Interval{});
    std::vector<double> xs = linspace(-3.0, 3.0, 101);
    std::vector<double> p, S, v, rhs, se;
    std::vector<ParticleEnsemble> ensembles;

    explicit Fixture(std::size_t particles)
        : p(xs.size()), S(xs.size()), v(xs.size()), rhs(xs.size()), se(xs.size()) {
        for (std::size_t j = 0; j < xs.size(); ++j) {
            p[j] = std::sin(xs[j]);
            S[j] = -0.2;
            v[j] = -0.1 * xs[j] * xs[j];
            ParticleEnsemble e;
            e.state_x = xs[j];
            e.noise = NoiseStream(1, j + 1);
            e.particles.resize(particles);
            e.noise.fill(e.particles);
            ensembles.push_back(std::move(e));
        }
    }
};

void advance(benchmark::State& state, Execution exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        advance_ensembles(f.ensembles, f.p, f.S, f.prob, 1e-4, {}, exec);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(f.xs.size()));
}

void rhs(benchmark::State& state, Execution exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        relaxed_rhs(f.ensembles, f.p, f.S, f.v, f.prob, f.rhs, f.se, exec);
        benchmark::DoNotOptimize(f.rhs.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(f.xs.size()));
}

void BM_AdvanceSerial(benchmark::State& s) { advance(s, Execution::Serial); }
void BM_AdvanceParallel(benchmark::State& s) { advance(s, Execution::Parallel); }
void BM_RelaxedRhsSerial(benchmark::State& s) { rhs(s, Execution::Serial); }
void BM_RelaxedRhsParallel(benchmark::State& s) { rhs(s, Execution::Parallel); }

}  // namespace

BENCHMARK(BM_AdvanceSerial)->Arg(200)->Arg(2000);
BENCHMARK(BM_AdvanceParallel)->Arg(200)->Arg(2000);
BENCHMARK(BM_RelaxedRhsSerial)->Arg(200)->Arg(2000);
BENCHMARK(BM_RelaxedRhsParallel)->Arg(200)->Arg(2000);

BENCHMARK_MAIN();
