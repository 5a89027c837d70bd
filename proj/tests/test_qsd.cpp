#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "nopo/error.hpp"
#include "nopo/qsd.hpp"
#include "oracles.hpp"

namespace {

using namespace nopo;
using cd = std::complex<double>;

SystemParams params(double d1, double d2, double chi, double eps, double lambda) {
    RawParams r;
    r.delta1 = d1;
    r.delta2 = d2;
    r.chi = chi;
    r.epsilon = eps;
    r.lambda = lambda;
    return validate(r);
}

TEST(EffectiveModel, OperatorsMatchIndependentConstruction) {
    const FockSpace s(4, 4);
    const auto model = effective_model(params(1.5, -0.5, 0.3, 0.8, 0.2), s);
    const oracle::MasterEquation me(4, 1, 1, 1.5, -0.5, 0.3, 0.8, 0.2);
    EXPECT_LT((model.hamiltonian().matrix() - me.h).norm(), 1e-13);
    for (int j = 0; j < 3; ++j) EXPECT_LT((model.lindblads()[j].matrix() - me.l[j]).norm(), 1e-13);
}

TEST(EffectiveModel, RejectsNonHermitianHamiltonian) {
    const FockSpace s(2, 2);
    const auto a = annihilation(s, Mode::one);
    EXPECT_THROW(EffectiveModel(s, a, {a, a, a}), ValidationError);
}

TEST(Csr, MatchesDenseProduct) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    CMatrix m = CMatrix::Zero(12, 12);
    for (int k = 0; k < 40; ++k) m(rng() % 12, rng() % 12) = {g(rng), g(rng)};
    const CsrOperator csr(m);
    CVector x(12);
    for (int i = 0; i < 12; ++i) x(i) = {g(rng), g(rng)};
    CVector y(12);
    csr.apply(x.data(), y.data());
    EXPECT_LT((y - m * x).norm(), 1e-13);
    EXPECT_LE(csr.nonzeros(), 40u);
}

TEST(Step, VacuumIsAFixedPointWithoutPump) {
    const FockSpace s(6, 6);
    const auto model = effective_model(params(3.0, -2.0, 0.7, 0.0, 0.5), s);
    QsdStepper stepper(model);
    auto psi = vacuum(s);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * 1e-3));
    for (int k = 0; k < 10'000; ++k) {
        NoiseIncrement xi{cd{g(rng), g(rng)}, cd{g(rng), g(rng)}, cd{g(rng), g(rng)}};
        stepper.step(psi, 1e-3, xi);
    }
    EXPECT_LT((psi.amplitudes - vacuum(s).amplitudes).norm(), 1e-10);
}

// Property: every step returns a unit vector.
TEST(Step, PreservesNorm) {
    const FockSpace s(8, 8);
    const auto model = effective_model(params(1.0, -1.0, 0.2, 1.5, 0.3), s);
    QsdStepper stepper(model);
    auto psi = coherent_state(s, cd{0.5, 0.2}, cd{-0.3, 0.4});
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * 1e-3));
    for (int k = 0; k < 2000; ++k) {
        NoiseIncrement xi{cd{g(rng), g(rng)}, cd{g(rng), g(rng)}, cd{g(rng), g(rng)}};
        stepper.step(psi, 1e-3, xi);
        ASSERT_NEAR(psi.norm(), 1.0, 1e-12);
    }
}

TEST(Step, PureFunctionMatchesStepper) {
    const FockSpace s(5, 5);
    const auto model = effective_model(params(1.0, 2.0, 0.2, 1.0, 0.1), s);
    const auto psi0 = coherent_state(s, 0.3, cd{0.0, 0.2});
    const NoiseIncrement xi{cd{0.01, -0.02}, cd{0.005, 0.0}, cd{-0.01, 0.01}};
    auto psi = psi0;
    QsdStepper(model).step(psi, 1e-3, xi);
    EXPECT_EQ((qsd_step(psi0, model, 1e-3, xi).amplitudes - psi.amplitudes).norm(), 0.0);
}

TEST(Trajectory, ConfigValidation) {
    TrajectoryConfig c;
    c.dt = 0.0;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.t_end = 1e-5;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.record_stride = 0;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.snapshot_times = {c.t_end + 1.0};
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(Trajectory, RecordsAtStrideAndEnd) {
    const FockSpace s(4, 4);
    const auto model = effective_model(params(0, 0, 0.1, 0.5, 0.1), s);
    TrajectoryConfig c;
    c.dt = 1e-3;
    c.t_end = 0.25;
    c.record_stride = 100;
    c.snapshot_times = {0.1, 0.0};
    const auto r = run_trajectory(model, vacuum(s), c);
    ASSERT_EQ(r.times.size(), 4u);
    EXPECT_NEAR(r.times[2], 0.2, 1e-12);
    EXPECT_NEAR(r.times.back(), 0.25, 1e-12);
    ASSERT_EQ(r.snapshots.size(), 2u);
    EXPECT_EQ(r.snapshots[1].amplitudes, vacuum(s).amplitudes);
}

TEST(Trajectory, SeedDeterminism) {
    const FockSpace s(6, 6);
    const auto model = effective_model(params(1, -1, 0.2, 1.2, 0.2), s);
    TrajectoryConfig c;
    c.t_end = 1.0;
    c.seed = 77;
    const auto a = run_trajectory(model, vacuum(s), c);
    const auto b = run_trajectory(model, vacuum(s), c);
    ASSERT_EQ(a.moments.size(), b.moments.size());
    for (std::size_t i = 0; i < a.moments.size(); ++i) {
        EXPECT_EQ(a.moments[i].a1a2, b.moments[i].a1a2);
        EXPECT_EQ(a.moments[i].n1, b.moments[i].n1);
    }
    c.seed = 78;
    const auto d = run_trajectory(model, vacuum(s), c);
    EXPECT_NE(a.moments.back().n1, d.moments.back().n1);
}

TEST(Trajectory, TruncationMonitor) {
    const FockSpace s(3, 3);
    const auto model = effective_model(params(0, 0, 0, 3.0, 0.0), s);
    TrajectoryConfig c;
    c.t_end = 2.0;
    c.record_stride = 10;
    const auto r = run_trajectory(model, vacuum(s), c);
    EXPECT_TRUE(r.truncation_warning);
    EXPECT_GT(r.max_top_population, kTruncationWarningLevel);
    c.strict_truncation = true;
    EXPECT_THROW(run_trajectory(model, vacuum(s), c), TruncationError);
}

TEST(Seeds, SplitMixStreamsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(trajectory_seed(42, i));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(trajectory_seed(42, 5), trajectory_seed(42, 5));
    EXPECT_NE(trajectory_seed(42, 5), trajectory_seed(43, 5));
}

EnsembleStats small_ensemble(std::size_t workers, bool pairs = false) {
    const FockSpace s(5, 5);
    const auto model = effective_model(params(1, -1, 0.3, 1.0, 0.2), s);
    TrajectoryConfig c;
    c.dt = 1e-3;
    c.t_end = 1.0;
    c.record_stride = 50;
    c.seed = 9;
    c.snapshot_times = {1.0};
    EnsembleOptions o;
    o.n_traj = 24;
    o.workers = workers;
    o.parity_pairs = pairs;
    return run_ensemble(model, vacuum(s), c, o);
}

TEST(Ensemble, WorkerCountIndependence) {
    const auto a = small_ensemble(1);
    const auto b = small_ensemble(4);
    ASSERT_EQ(a.mean.size(), b.mean.size());
    for (std::size_t t = 0; t < a.mean.size(); ++t) {
        EXPECT_EQ(a.mean[t].n1, b.mean[t].n1);
        EXPECT_EQ(a.mean[t].a1a2, b.mean[t].a1a2);
        EXPECT_EQ(a.standard_error[t].n2, b.standard_error[t].n2);
    }
    EXPECT_EQ((a.snapshots[0].matrix - b.snapshots[0].matrix).norm(), 0.0);
    EXPECT_EQ(a.trajectory_count, 24u);
    EXPECT_EQ(a.group_means.size(), 20u);
}

TEST(Ensemble, SnapshotDensityIsValid) {
    const auto a = small_ensemble(2);
    const auto d = diagnose(a.snapshots[0]);
    EXPECT_TRUE(d.valid());
    const auto m = moments(a.snapshots[0]);
    EXPECT_NEAR(m.n1, a.mean.back().n1, 1e-12);
}

TEST(Ensemble, ParityPairsGiveSymmetricState) {
    const auto p = small_ensemble(3, true);
    for (const auto& m : p.mean) {
        EXPECT_EQ(m.a1, cd{});
        EXPECT_EQ(m.a2, cd{});
    }
    const auto& rho = p.snapshots[0].matrix;
    const FockSpace s(5, 5);
    double odd = 0.0;
    for (int i = 0; i < s.dim(); ++i)
        for (int j = 0; j < s.dim(); ++j) {
            const int ni = i / 6 + i % 6;
            const int nj = j / 6 + j % 6;
            if ((ni + nj) % 2 == 1) odd = std::max(odd, std::abs(rho(i, j)));
        }
    EXPECT_LT(odd, 1e-15);
}

TEST(Ensemble, ParityPairsNeedEvenCountAndDefiniteParity) {
    const FockSpace s(5, 5);
    const auto model = effective_model(params(1, -1, 0.3, 1.0, 0.2), s);
    TrajectoryConfig c;
    c.t_end = 0.1;
    EnsembleOptions o;
    o.n_traj = 5;
    o.parity_pairs = true;
    EXPECT_THROW(run_ensemble(model, vacuum(s), c, o), ValidationError);
    o.n_traj = 6;
    EXPECT_THROW(run_ensemble(model, coherent_state(s, 0.3, 0.0), c, o), ValidationError);
    EXPECT_NO_THROW(run_ensemble(model, fock_state(s, 1, 0), c, o));
}

// Ensemble means agree with the dense master equation.
TEST(Ensemble, AgreesWithMasterEquation) {
    const int n_max = 4;
    const FockSpace s(n_max, n_max);
    const auto model = effective_model(params(1.0, -0.5, 0.3, 0.6, 0.4), s);
    TrajectoryConfig c;
    c.dt = 1e-3;
    c.t_end = 1.5;
    c.record_stride = 500;
    c.seed = 2024;
    EnsembleOptions o;
    o.n_traj = 400;
    o.workers = 0;
    o.keep_snapshots = false;
    const auto stats = run_ensemble(model, coherent_state(s, cd{0.4, 0.1}, cd{0.0, -0.3}), c, o);

    const oracle::MasterEquation me(n_max, 1, 1, 1.0, -0.5, 0.3, 0.6, 0.4);
    const auto psi0 = coherent_state(s, cd{0.4, 0.1}, cd{0.0, -0.3}).amplitudes;
    oracle::Mat rho = psi0 * psi0.adjoint();
    const auto a1 = me.a1();
    const auto a2 = me.a2();
    double t = 0.0;
    for (std::size_t k = 1; k < stats.times.size(); ++k) {
        rho = me.evolve(rho, stats.times[k] - t, 1e-3);
        t = stats.times[k];
        const double n1 = (rho * a1.adjoint() * a1).trace().real();
        const cd x = (rho * a1 * a2).trace();
        const cd y = (rho * a1).trace();
        const auto& m = stats.mean[k];
        const auto& se = stats.standard_error[k];
        EXPECT_NEAR(m.n1, n1, 4 * se.n1 + 2e-3) << "t=" << t;
        EXPECT_NEAR(m.a1a2.real(), x.real(), 4 * se.a1a2.real() + 2e-3) << "t=" << t;
        EXPECT_NEAR(m.a1.imag(), y.imag(), 4 * se.a1.imag() + 2e-3) << "t=" << t;
    }
}

TEST(Ensemble, DampedCavityDecay) {
    const FockSpace s(5, 1);
    const auto model = effective_model(params(0.0, 0.0, 0.0, 0.0, 0.0), s);
    TrajectoryConfig c;
    c.dt = 1e-3;
    c.t_end = 1.0;
    c.record_stride = 250;
    c.seed = 5;
    EnsembleOptions o;
    o.n_traj = 200;
    o.keep_snapshots = false;
    const auto stats = run_ensemble(model, fock_state(s, 3, 0), c, o);
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        const double expected = 3.0 * std::exp(-2.0 * stats.times[k]);
        EXPECT_NEAR(stats.mean[k].n1, expected, 3 * stats.standard_error[k].n1 + 1e-2);
    }
}

}  // namespace
