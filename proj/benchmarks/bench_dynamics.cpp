#include <benchmark/benchmark.h>

#include "twomem/constants.hpp"
#include "twomem/dynamics.hpp"
#include "twomem/ensemble.hpp"
#include "twomem/quantum.hpp"

using namespace twomem;

namespace {

DynamicsModel make_model(ModelTier tier) {
    auto p = PhysicalParams::reference();
    const double Q1 = 0.562 * p.lambda, Q2 = 0.440 * p.lambda;
    p = with_shifted_detuning(p, Q1, Q2, p.omega_bar());
    const auto c = coupling_coefficients(p, Q1, Q2);
    return DynamicsModel(p, Q1, Q2, c, DriveSpec::from_power(1e-3, p), tier);
}

const ModelTier kTiers[] = {ModelTier::FirstOrder, ModelTier::SecondOrder, ModelTier::Full};

}  // namespace

static void Drift(benchmark::State& state) {
    const auto model = make_model(kTiers[state.range(0)]);
    DynamicsModel::Vector u{120.0, -30.0, -80.0, 15.0, 400.0, -250.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.drift(0.3, u));
        u[0] += 1e-6;
    }
    state.SetLabel(tier_name(model.tier()));
}
BENCHMARK(Drift)->DenseRange(0, 2);

// noiseless RK4, 10^4 steps
static void Propagate(benchmark::State& state) {
    const auto model = make_model(kTiers[state.range(0)]);
    IntegratorOptions opt;
    opt.dtau = 0.005;
    opt.tau_end = 50.0;
    opt.stride = 100;
    SystemState s0;
    s0.q1 = s0.q2 = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(propagate(model, s0, NoiseSpec{}, opt));
    state.SetItemsProcessed(state.iterations() * 10000);
    state.SetLabel(tier_name(model.tier()));
}
BENCHMARK(Propagate)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

// one stochastic trajectory of the two-tone entanglement setup, 2000 steps
static void StochasticTrajectory(benchmark::State& state) {
    auto p = PhysicalParams::reference();
    p.omega1 = kTwoPi * 235e3;
    p.omega2 = 1.1 * p.omega1;
    p.L = 9e-3;
    EnsembleSpec spec;
    spec.tier = kTiers[state.range(0)];
    spec.Q1 = -0.09 * p.lambda;
    spec.Q2 = -spec.Q1;
    spec.params = with_shifted_detuning(p, spec.Q1, spec.Q2, 0.0);
    spec.couplings = coupling_coefficients(spec.params, spec.Q1, spec.Q2);
    spec.drive = DriveSpec::from_sideband_rates(12163.6, 45180.3, spec.params, spec.couplings);
    spec.dtau = 0.01;
    spec.sample_taus = {0.0, 10.0, 20.0};
    const DynamicsModel model(spec.params, spec.Q1, spec.Q2, spec.couplings, spec.drive, spec.tier);
    std::uint64_t index = 0;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_trajectory(spec, model, index++));
    state.SetItemsProcessed(state.iterations() * 2000);
    state.SetLabel(tier_name(spec.tier));
}
BENCHMARK(StochasticTrajectory)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

static void LogNegativity(benchmark::State& state) {
    Mat4 v = 0.5 * Mat4::Identity();
    v(0, 2) = v(2, 0) = 0.2;
    v(1, 3) = v(3, 1) = -0.2;
    v.diagonal().array() += 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(logarithmic_negativity(v));
}
BENCHMARK(LogNegativity);

BENCHMARK_MAIN();
