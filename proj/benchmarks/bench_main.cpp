#include <random>

#include <benchmark/benchmark.h>

#include "nopo/analysis.hpp"
#include "nopo/semiclassical.hpp"

namespace {

using namespace nopo;
using cd = std::complex<double>;

SystemParams fig4(double lambda = 0.1) {
    RawParams r;
    r.delta1 = 10;
    r.delta2 = -10;
    r.chi = 0.1;
    r.epsilon = 1.0;
    r.lambda = lambda;
    return validate(r);
}

void BM_QsdStep(benchmark::State& state) {
    const int n_max = static_cast<int>(state.range(0));
    const FockSpace space(n_max, n_max);
    const auto model = effective_model(fig4(), space);
    QsdStepper stepper(model);
    auto psi = coherent_state(space, 0.5, cd{0.0, 0.5});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * 5e-4));
    for (auto _ : state) {
        stepper.step(psi, 5e-4, {cd{g(rng), g(rng)}, cd{g(rng), g(rng)}, cd{g(rng), g(rng)}});
        benchmark::DoNotOptimize(psi.amplitudes.data());
    }
    state.SetLabel("dim " + std::to_string(space.dim()));
}
BENCHMARK(BM_QsdStep)->Arg(8)->Arg(14)->Arg(20);

void BM_Integrate(benchmark::State& state) {
    RawParams r;
    r.delta1 = 10;
    r.delta2 = -5;
    r.chi = 0.1;
    r.epsilon = 4;
    r.lambda = 0.1;
    const auto p = validate(r);
    for (auto _ : state) {
        auto traj = integrate(kDefaultSeed, p, kDefaultClassicalStep, 10.0, 100);
        benchmark::DoNotOptimize(traj.states.back());
    }
    state.SetItemsProcessed(state.iterations() * 10'000);
}
BENCHMARK(BM_Integrate);

void BM_Wigner(benchmark::State& state) {
    const int n_max = static_cast<int>(state.range(0));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    CMatrix x(n_max + 1, n_max + 1);
    for (int i = 0; i <= n_max; ++i)
        for (int j = 0; j <= n_max; ++j) x(i, j) = {g(rng), g(rng)};
    CMatrix m = x * x.adjoint();
    const auto rho = single_mode_density(m / m.trace());
    for (auto _ : state) {
        auto w = wigner(rho, GridSpec{4.0, 101});
        benchmark::DoNotOptimize(w.values.data());
    }
}
BENCHMARK(BM_Wigner)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EntanglementVariance(benchmark::State& state) {
    TwoModeMoments m;
    m.n1 = 1.2;
    m.n2 = 1.1;
    m.a1a2 = {0.4, 0.9};
    m.a1a1 = {0.1, -0.05};
    m.a1dag_a2 = {0.02, 0.01};
    for (auto _ : state) benchmark::DoNotOptimize(entanglement_variance(m));
}
BENCHMARK(BM_EntanglementVariance)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
