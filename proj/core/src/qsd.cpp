#include "nopo/qsd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "nopo/error.hpp"

namespace nopo {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

static_assert(kLindbladCount == 3, "step kernel is unrolled for three channels");

constexpr std::size_t kFlatSize = 14;
using Flat = std::array<double, kFlatSize>;

Flat flatten(const TwoModeMoments& m) {
    return {m.a1.real(),   m.a1.imag(),   m.a2.real(),   m.a2.imag(),
            m.a1a1.real(), m.a1a1.imag(), m.a2a2.real(), m.a2a2.imag(),
            m.a1a2.real(), m.a1a2.imag(), m.a1dag_a2.real(), m.a1dag_a2.imag(),
            m.n1,          m.n2};
}

TwoModeMoments unflatten(const Flat& f) {
    TwoModeMoments m;
    m.a1 = {f[0], f[1]};
    m.a2 = {f[2], f[3]};
    m.a1a1 = {f[4], f[5]};
    m.a2a2 = {f[6], f[7]};
    m.a1a2 = {f[8], f[9]};
    m.a1dag_a2 = {f[10], f[11]};
    m.n1 = f[12];
    m.n2 = f[13];
    return m;
}

// Neumaier-compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

}  // namespace

CsrOperator::CsrOperator(const CMatrix& dense) {
    row_start_.reserve(static_cast<std::size_t>(dense.rows()) + 1);
    row_start_.push_back(0);
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
        for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            const cd v = dense(i, j);
            if (v != 0.0) {
                cols_.push_back(static_cast<int>(j));
                re_.push_back(v.real());
                im_.push_back(v.imag());
            }
        }
        row_start_.push_back(static_cast<int>(cols_.size()));
    }
}

void CsrOperator::apply(const cd* x, cd* y) const noexcept {
    const auto rows = row_start_.size() - 1;
    for (std::size_t i = 0; i < rows; ++i) {
        double sr = 0.0;
        double si = 0.0;
        for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const cd xv = x[cols_[kk]];
            sr += re_[kk] * xv.real() - im_[kk] * xv.imag();
            si += re_[kk] * xv.imag() + im_[kk] * xv.real();
        }
        y[i] = {sr, si};
    }
}

EffectiveModel::EffectiveModel(FockSpace space, ModeOperator hamiltonian,
                               std::array<ModeOperator, kLindbladCount> lindblads)
    : space_(space), hamiltonian_(std::move(hamiltonian)), lindblads_(std::move(lindblads)) {
    if (!(hamiltonian_.space() == space_)) throw ValidationError("Hamiltonian lives on a different space");
    for (const auto& l : lindblads_) {
        if (!(l.space() == space_)) throw ValidationError("Lindblad operator lives on a different space");
    }
    const double herm = (hamiltonian_.matrix() - hamiltonian_.matrix().adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-10) throw ValidationError("Hamiltonian is not Hermitian");

    CMatrix drift = -kI * hamiltonian_.matrix();
    for (std::size_t j = 0; j < kLindbladCount; ++j) {
        const CMatrix& l = lindblads_[j].matrix();
        drift -= 0.5 * (l.adjoint() * l);
        sparse_lindblads_[j] = CsrOperator(l);
    }
    drift_ = CsrOperator(drift);
}

EffectiveModel effective_model(const SystemParams& p, const FockSpace& space) {
    const ModeOperator a1 = annihilation(space, Mode::one);
    const ModeOperator a2 = annihilation(space, Mode::two);
    const ModeOperator a1d = a1.adjoint();
    const ModeOperator a2d = a2.adjoint();

    ModeOperator h = cd(p.delta1()) * (a1d * a1) + cd(p.delta2()) * (a2d * a2) +
                     cd(p.chi()) * (a1d * a2 + a1 * a2d) +
                     (kI * p.epsilon()) * (a1d * a2d - a1 * a2);
    std::array<ModeOperator, kLindbladCount> lindblads{
        cd(std::sqrt(2.0 * p.gamma1())) * a1,
        cd(std::sqrt(2.0 * p.gamma2())) * a2,
        cd(std::sqrt(2.0 * p.lambda())) * (a1 * a2),
    };
    return {space, std::move(h), std::move(lindblads)};
}

QsdStepper::QsdStepper(const EffectiveModel& model)
    : model_(&model), drift_term_(model.space().dim()) {
    for (auto& v : applied_) v.resize(model.space().dim());
}

void QsdStepper::step(StateVector& state, double dt, const NoiseIncrement& noise) {
    cd* psi = state.amplitudes.data();
    const auto dim = static_cast<std::size_t>(state.amplitudes.size());
    model_->drift_operator().apply(psi, drift_term_.data());

    // psi + dpsi = psi_coeff psi + dt M psi + sum_j coeff_j L_j psi
    cd psi_coeff = 1.0;
    std::array<cd, kLindbladCount> coeff;
    for (std::size_t j = 0; j < kLindbladCount; ++j) {
        cd* lpsi = applied_[j].data();
        model_->sparse_lindblad(j).apply(psi, lpsi);
        double mr = 0.0;
        double mi = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            mr += psi[i].real() * lpsi[i].real() + psi[i].imag() * lpsi[i].imag();
            mi += psi[i].real() * lpsi[i].imag() - psi[i].imag() * lpsi[i].real();
        }
        const cd mean{mr, mi};
        coeff[j] = std::conj(mean) * dt + noise[j];
        psi_coeff -= 0.5 * std::norm(mean) * dt + mean * noise[j];
    }

    // Explicit real arithmetic: std::complex products carry NaN-recovery
    // branches that dominate this loop.
    const cd* m = drift_term_.data();
    const cd* l0 = applied_[0].data();
    const cd* l1 = applied_[1].data();
    const cd* l2 = applied_[2].data();
    const double pr = psi_coeff.real(), pi = psi_coeff.imag();
    const double c0r = coeff[0].real(), c0i = coeff[0].imag();
    const double c1r = coeff[1].real(), c1i = coeff[1].imag();
    const double c2r = coeff[2].real(), c2i = coeff[2].imag();
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double re = pr * psi[i].real() - pi * psi[i].imag() + dt * m[i].real() +
                          c0r * l0[i].real() - c0i * l0[i].imag() + c1r * l1[i].real() -
                          c1i * l1[i].imag() + c2r * l2[i].real() - c2i * l2[i].imag();
        const double im = pr * psi[i].imag() + pi * psi[i].real() + dt * m[i].imag() +
                          c0r * l0[i].imag() + c0i * l0[i].real() + c1r * l1[i].imag() +
                          c1i * l1[i].real() + c2r * l2[i].imag() + c2i * l2[i].real();
        psi[i] = {re, im};
        norm2 += re * re + im * im;
    }

    const double n = std::sqrt(norm2);
    if (!(n >= 1e-8) || !std::isfinite(n)) throw NumericalError("QSD norm collapse");
    state.amplitudes /= n;
}

StateVector qsd_step(const StateVector& state, const EffectiveModel& model, double dt,
                     const NoiseIncrement& noise) {
    if (!(state.space == model.space())) throw ValidationError("state and model spaces differ");
    StateVector next = state;
    QsdStepper stepper(model);
    stepper.step(next, dt, noise);
    return next;
}

void validate(const TrajectoryConfig& c) {
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ValidationError("dt must be positive");
    if (!(c.t_end >= c.dt) || !std::isfinite(c.t_end)) throw ValidationError("t_end must be at least dt");
    if (c.record_stride < 1) throw ValidationError("record_stride must be at least 1");
    for (double t : c.snapshot_times) {
        if (!(t >= 0.0 && t <= c.t_end)) throw ValidationError("snapshot time outside [0, t_end]");
    }
}

TrajectoryRecord run_trajectory(const EffectiveModel& model, const StateVector& initial,
                                const TrajectoryConfig& config) {
    validate(config);
    if (!(initial.space == model.space())) throw ValidationError("initial state and model spaces differ");

    const auto steps = static_cast<std::size_t>(std::llround(config.t_end / config.dt));
    std::vector<std::pair<std::size_t, std::size_t>> snapshot_steps;  // (step, slot)
    for (std::size_t k = 0; k < config.snapshot_times.size(); ++k) {
        const auto s = static_cast<std::size_t>(std::llround(config.snapshot_times[k] / config.dt));
        snapshot_steps.emplace_back(std::min(s, steps), k);
    }
    std::sort(snapshot_steps.begin(), snapshot_steps.end());

    TrajectoryRecord record;
    record.snapshot_times = config.snapshot_times;
    record.snapshots.assign(config.snapshot_times.size(), initial);
    record.times.reserve(steps / config.record_stride + 2);
    record.moments.reserve(steps / config.record_stride + 2);

    StateVector psi = initial;
    psi.normalize();

    auto observe = [&](std::size_t step) {
        const double t = static_cast<double>(step) * config.dt;
        record.times.push_back(t);
        record.moments.push_back(moments(psi));
        const double top = top_level_population(psi);
        record.max_top_population = std::max(record.max_top_population, top);
        if (top > kTruncationWarningLevel) {
            record.truncation_warning = true;
            if (config.strict_truncation) {
                std::ostringstream msg;
                msg << "Fock truncation exceeded: top-level population " << top << " at t = " << t;
                throw TruncationError(msg.str());
            }
        }
    };

    std::size_t next_snapshot = 0;
    auto take_snapshots = [&](std::size_t step) {
        while (next_snapshot < snapshot_steps.size() && snapshot_steps[next_snapshot].first == step) {
            record.snapshots[snapshot_steps[next_snapshot].second] = psi;
            ++next_snapshot;
        }
    };

    std::mt19937_64 engine(config.seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * config.dt));
    QsdStepper stepper(model);
    NoiseIncrement noise;

    observe(0);
    take_snapshots(0);
    for (std::size_t step = 1; step <= steps; ++step) {
        for (auto& xi : noise) {
            const double re = normal(engine);
            const double im = normal(engine);
            xi = {re, im};
        }
        if (config.mirrored_noise) {
            noise[0] = -noise[0];
            noise[1] = -noise[1];
        }
        try {
            stepper.step(psi, config.dt, noise);
        } catch (const NumericalError& e) {
            std::ostringstream msg;
            msg << e.what() << " at t = " << static_cast<double>(step) * config.dt;
            throw NumericalError(msg.str());
        }
        if (step % config.record_stride == 0 || step == steps) observe(step);
        take_snapshots(step);
    }
    return record;
}

namespace {

bool parity_definite(const StateVector& state) {
    double even = 0.0;
    double odd = 0.0;
    const auto& space = state.space;
    for (int n1 = 0; n1 <= space.n_max1(); ++n1) {
        for (int n2 = 0; n2 <= space.n_max2(); ++n2) {
            ((n1 + n2) % 2 == 0 ? even : odd) += std::norm(state.at(n1, n2));
        }
    }
    return std::min(even, odd) <= 1e-24 * (even + odd);
}

}  // namespace

std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

EnsembleStats run_ensemble(const EffectiveModel& model, const StateVector& initial,
                           const TrajectoryConfig& config, const EnsembleOptions& options) {
    validate(config);
    if (options.n_traj < 1) throw ValidationError("n_traj must be at least 1");
    if (options.jackknife_groups < 1) throw ValidationError("jackknife_groups must be at least 1");
    const std::size_t unit = options.parity_pairs ? 2 : 1;
    if (options.parity_pairs) {
        if (options.n_traj % 2 != 0) throw ValidationError("parity pairs need an even n_traj");
        if (!parity_definite(initial)) throw ValidationError("parity pairs need a parity-definite initial state");
    }

    struct Outcome {
        std::optional<TrajectoryRecord> record;
        std::string error;
    };
    std::vector<Outcome> outcomes(options.n_traj);

    std::size_t workers = options.workers;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, options.n_traj);

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < options.n_traj; i = next.fetch_add(1)) {
            TrajectoryConfig own = config;
            own.seed = trajectory_seed(config.seed, i / unit);
            own.mirrored_noise = options.parity_pairs && i % 2 == 1;
            if (!options.keep_snapshots) own.snapshot_times.clear();
            try {
                outcomes[i].record = run_trajectory(model, initial, own);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    // A sample is one trajectory, or one antithetic pair; a failure drops
    // the whole sample.
    EnsembleStats stats;
    std::vector<std::vector<const TrajectoryRecord*>> samples;
    std::vector<const TrajectoryRecord*> good;
    std::string first_error;
    for (std::size_t i = 0; i < options.n_traj; i += unit) {
        std::vector<const TrajectoryRecord*> members;
        for (std::size_t j = i; j < i + unit; ++j) {
            if (outcomes[j].record) {
                members.push_back(&*outcomes[j].record);
            } else if (first_error.empty()) {
                first_error = outcomes[j].error;
            }
        }
        if (members.size() == unit) {
            good.insert(good.end(), members.begin(), members.end());
            samples.push_back(std::move(members));
        } else {
            stats.failed_count += unit;
        }
    }
    if (good.empty() || static_cast<double>(stats.failed_count) > 0.01 * static_cast<double>(options.n_traj)) {
        std::ostringstream msg;
        msg << stats.failed_count << " of " << options.n_traj << " trajectories failed: " << first_error;
        throw NumericalError(msg.str());
    }

    const std::size_t n = samples.size();
    const std::size_t n_times = good.front()->times.size();
    stats.trajectory_count = good.size();
    stats.times = good.front()->times;
    stats.mean.resize(n_times);
    stats.standard_error.resize(n_times);
    const std::size_t groups = std::min(options.jackknife_groups, n);
    stats.group_means.assign(groups, std::vector<TwoModeMoments>(n_times));

    std::vector<Flat> flat(n);
    for (std::size_t t = 0; t < n_times; ++t) {
        for (std::size_t k = 0; k < n; ++k) {
            flat[k] = flatten(samples[k].front()->moments[t]);
            if (unit == 2) {
                const Flat other = flatten(samples[k].back()->moments[t]);
                for (std::size_t c = 0; c < kFlatSize; ++c) flat[k][c] = 0.5 * (flat[k][c] + other[c]);
            }
        }

        Flat mean{};
        Flat se{};
        for (std::size_t c = 0; c < kFlatSize; ++c) {
            CompensatedSum sum;
            for (std::size_t k = 0; k < n; ++k) sum.add(flat[k][c]);
            mean[c] = sum.value() / static_cast<double>(n);
            if (n > 1) {
                CompensatedSum sq;
                for (std::size_t k = 0; k < n; ++k) sq.add((flat[k][c] - mean[c]) * (flat[k][c] - mean[c]));
                se[c] = std::sqrt(sq.value() / static_cast<double>(n - 1) / static_cast<double>(n));
            }
        }
        stats.mean[t] = unflatten(mean);
        stats.standard_error[t] = unflatten(se);

        for (std::size_t g = 0; g < groups; ++g) {
            Flat gm{};
            std::size_t members = 0;
            for (std::size_t c = 0; c < kFlatSize; ++c) {
                CompensatedSum sum;
                members = 0;
                for (std::size_t k = g; k < n; k += groups, ++members) sum.add(flat[k][c]);
                gm[c] = sum.value() / static_cast<double>(members);
            }
            stats.group_means[g][t] = unflatten(gm);
        }
    }

    for (const auto* r : good) {
        stats.max_top_population = std::max(stats.max_top_population, r->max_top_population);
        stats.truncation_warning = stats.truncation_warning || r->truncation_warning;
    }

    if (options.keep_snapshots) {
        stats.snapshot_times = config.snapshot_times;
        std::vector<StateVector> states;
        states.reserve(n);
        for (std::size_t s = 0; s < config.snapshot_times.size(); ++s) {
            states.clear();
            for (const auto* r : good) states.push_back(r->snapshots[s]);
            stats.snapshots.push_back(density_from_ensemble(states));
        }
    }
    return stats;
}

}  // namespace nopo
