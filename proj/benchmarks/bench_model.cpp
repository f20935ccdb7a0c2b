#include <benchmark/benchmark.h>

#include "twomem/maps.hpp"
#include "twomem/model.hpp"

using namespace twomem;

namespace {

const PhysicalParams kParams = PhysicalParams::reference();
const double kQ1 = 0.562 * kParams.lambda;
const double kQ2 = 0.440 * kParams.lambda;

}  // namespace

static void PlacementSetup(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(Placement(kParams, kQ1, kQ2));
}
BENCHMARK(PlacementSetup);

static void EvaluateShift(benchmark::State& state) {
    const Placement place(kParams, kQ1, kQ2);
    double q = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(place.evaluate(q, -0.5 * q));
        q += 1e-3;
    }
}
BENCHMARK(EvaluateShift);

static void ShiftChange(benchmark::State& state) {
    const Placement place(kParams, kQ1, kQ2);
    double q = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(place.shift_change(q, -0.5 * q));
        q += 1e-3;
    }
}
BENCHMARK(ShiftChange);

static void CouplingCoefficients(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(coupling_coefficients(kParams, kQ1, kQ2));
}
BENCHMARK(CouplingCoefficients);

// one worker so the numbers are per core
static void ScanPlane(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(scan_plane(kParams, GridSpec::square(0.25, 0.75, n), 1));
    state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(ScanPlane)->RangeMultiplier(2)->Range(32, 256)->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
