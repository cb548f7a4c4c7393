#include "delayvib/optimizer.hpp"
#include "delayvib/sim.hpp"
#include "delayvib/spectrum.hpp"
#include "support.hpp"

#include <benchmark/benchmark.h>

namespace ts = delayvib::testing_support;
using namespace delayvib;

namespace {

struct Reference {
    DdaeSystem sys = ts::rig_system(0);
    GainPartition partition = ts::rig_velocity_partition(sys);
    EliminatedObjective objective{sys, partition, ts::rig_omegas()};
    GainMatrix gain = objective.evaluate(ts::rig_reference_free_gains()).gain;
};

const Reference& reference() {
    static const Reference r;
    return r;
}

} // namespace

static void CollocationEigenvalues(benchmark::State& state) {
    const auto& ref = reference();
    const RetardedSystem ret = reduce_to_retarded(ref.sys, ref.gain);
    for (auto _ : state) {
        benchmark::DoNotOptimize(collocation_eigenvalues(ret, static_cast<int>(state.range(0))));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(CollocationEigenvalues)->Arg(20)->Arg(30)->Arg(45)->Arg(60)->Unit(benchmark::kMillisecond)->Complexity();

static void ComputeSpectrum(benchmark::State& state) {
    const auto& ref = reference();
    SpectrumOptions options;
    options.grid_points = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(compute_spectrum(ref.sys, ref.gain, std::nullopt, options));
    }
}
BENCHMARK(ComputeSpectrum)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

static void ObjectiveWithGradient(benchmark::State& state) {
    const auto& ref = reference();
    const Eigen::VectorXd x = ts::rig_reference_free_gains();
    for (auto _ : state) {
        benchmark::DoNotOptimize(ref.objective(x));
    }
}
BENCHMARK(ObjectiveWithGradient)->Unit(benchmark::kMillisecond);

static void RefineRoot(benchmark::State& state) {
    const auto& ref = reference();
    const RetardedSystem ret = reduce_to_retarded(ref.sys, ref.gain);
    const Spectrum s = compute_spectrum(ref.sys, ref.gain);
    const Complex guess = s.roots.front().value + Complex(1e-3, 1e-3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(refine_root(ret, guess));
    }
}
BENCHMARK(RefineRoot)->Unit(benchmark::kMicrosecond);

static void SimulateClosedLoop(benchmark::State& state) {
    const auto& ref = reference();
    SimScenario scenario;
    scenario.plant = ts::rig_plant();
    scenario.controller = realize_controller(ref.gain);
    scenario.delays = ts::rig_delays();
    scenario.disturbance = ts::rig_disturbance();
    scenario.t_on = 1.0;
    scenario.t_end = static_cast<double>(state.range(0));
    scenario.record_states = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_closed_loop(scenario));
    }
}
BENCHMARK(SimulateClosedLoop)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
