#pragma once

// Quantum state diffusion for the pump-eliminated two-mode model:
//
//   H  = delta1 a1^+ a1 + delta2 a2^+ a2 + chi (a1^+ a2 + a1 a2^+)
//        + i epsilon (a1^+ a2^+ - a1 a2)
//   L1 = sqrt(2 gamma1) a1,  L2 = sqrt(2 gamma2) a2,  L3 = sqrt(2 lambda) a1 a2
//
// With factorized moments this reproduces the mean-field equations in
// semiclassical.hpp, including the pump-depletion term generated by L3.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "nopo/fockspace.hpp"
#include "nopo/model.hpp"

namespace nopo {

/// Compressed-row operator used in the trajectory inner loop.
class CsrOperator {
public:
    CsrOperator() = default;
    /// Keeps entries with nonzero magnitude.
    explicit CsrOperator(const CMatrix& dense);

    /// y = A x. x and y must not alias.
    void apply(const std::complex<double>* x, std::complex<double>* y) const noexcept;
    std::size_t nonzeros() const noexcept { return cols_.size(); }

private:
    std::vector<int> row_start_;
    std::vector<int> cols_;
    std::vector<double> re_;
    std::vector<double> im_;
};

inline constexpr std::size_t kLindbladCount = 3;
using NoiseIncrement = std::array<std::complex<double>, kLindbladCount>;

class EffectiveModel {
public:
    /// Throws ValidationError if the Hamiltonian is not Hermitian to 1e-10
    /// or any operator lives on a different space.
    EffectiveModel(FockSpace space, ModeOperator hamiltonian,
                   std::array<ModeOperator, kLindbladCount> lindblads);

    const FockSpace& space() const noexcept { return space_; }
    const ModeOperator& hamiltonian() const noexcept { return hamiltonian_; }
    const std::array<ModeOperator, kLindbladCount>& lindblads() const noexcept { return lindblads_; }

    /// -i H - 1/2 sum_j L_j^+ L_j, in the sparse form used for stepping.
    const CsrOperator& drift_operator() const noexcept { return drift_; }
    const CsrOperator& sparse_lindblad(std::size_t j) const noexcept { return sparse_lindblads_[j]; }

private:
    FockSpace space_;
    ModeOperator hamiltonian_;
    std::array<ModeOperator, kLindbladCount> lindblads_;
    CsrOperator drift_;
    std::array<CsrOperator, kLindbladCount> sparse_lindblads_;
};

EffectiveModel effective_model(const SystemParams& params, const FockSpace& space);

/// One Euler-Maruyama QSD step with reusable scratch space:
///
///   dpsi = M psi dt + sum_j (<L_j>* L_j - |<L_j>|^2 / 2) psi dt
///          + sum_j (L_j - <L_j>) psi dxi_j,      M = -i H - 1/2 sum_j L_j^+ L_j
///
/// followed by renormalization. The step must keep ||H|| dt and
/// ||L_j||^2 dt small over the populated Fock levels; otherwise the explicit
/// scheme pumps population into the top of the truncated space.
class QsdStepper {
public:
    explicit QsdStepper(const EffectiveModel& model);

    /// The noise increments must satisfy E[dxi_i conj(dxi_j)] = delta_ij dt
    /// and E[dxi_i dxi_j] = 0. Throws NumericalError if the norm drops below
    /// 1e-8 before renormalization.
    void step(StateVector& state, double dt, const NoiseIncrement& noise);

private:
    const EffectiveModel* model_;
    CVector drift_term_;
    std::array<CVector, kLindbladCount> applied_;
};

StateVector qsd_step(const StateVector& state, const EffectiveModel& model, double dt,
                     const NoiseIncrement& noise);

struct TrajectoryConfig {
    double dt = 5e-4;
    double t_end = 10.0;
    std::size_t record_stride = 100;
    std::uint64_t seed = 1;
    std::vector<double> snapshot_times;
    /// Throw TruncationError instead of flagging a warning.
    bool strict_truncation = false;
    /// Negate the increments driving L1 and L2. With P = (-1)^(n1 + n2),
    /// the model is parity invariant and L1, L2 are parity odd, so a mirrored
    /// trajectory from P psi0 is exactly P times the plain one from psi0.
    bool mirrored_noise = false;
};

void validate(const TrajectoryConfig& config);

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<TwoModeMoments> moments;
    std::vector<double> snapshot_times;
    std::vector<StateVector> snapshots;
    double max_top_population = 0.0;
    bool truncation_warning = false;
};

/// Fixed-step QSD trajectory. Expectations are recorded at t = 0 and every
/// record_stride steps; snapshots at the steps nearest to snapshot_times.
/// Identical (model, initial, config) gives a bit-identical record.
TrajectoryRecord run_trajectory(const EffectiveModel& model, const StateVector& initial,
                                const TrajectoryConfig& config);

/// splitmix64 finalizer applied to master + (index + 1) * golden-ratio
/// increment. Trajectory i of an ensemble runs with this seed.
std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index);

struct EnsembleStats {
    std::vector<double> times;
    /// Ensemble means of the recorded expectations.
    std::vector<TwoModeMoments> mean;
    /// Standard errors, component-wise: a complex entry holds the standard
    /// error of the real part in .real() and of the imaginary part in .imag().
    std::vector<TwoModeMoments> standard_error;
    /// Per-group means for jackknife estimates of nonlinear functionals.
    /// Successful trajectory k goes to group k % group_count.
    std::vector<std::vector<TwoModeMoments>> group_means;
    std::size_t trajectory_count = 0;
    std::size_t failed_count = 0;

    std::vector<double> snapshot_times;
    /// Two-mode ensemble density matrices at snapshot_times.
    std::vector<DensityMatrix> snapshots;

    double max_top_population = 0.0;
    bool truncation_warning = false;
};

struct EnsembleOptions {
    std::size_t n_traj = 100;
    /// 0 selects std::thread::hardware_concurrency().
    std::size_t workers = 0;
    std::size_t jackknife_groups = 20;
    bool keep_snapshots = true;
    /// Antithetic sampling: trajectories 2k and 2k+1 share a seed, the second
    /// with mirrored noise. Needs a parity-definite initial state and an even
    /// n_traj. The ensemble state is then exactly parity symmetric and the
    /// statistics treat each pair as one sample.
    bool parity_pairs = false;
};

/// Runs n_traj trajectories (independent, or in antithetic pairs). Results are reduced in trajectory
/// order, so the output does not depend on the worker count. Failed
/// trajectories are dropped; more than 1% failures aborts with the first
/// failure's message.
EnsembleStats run_ensemble(const EffectiveModel& model, const StateVector& initial,
                           const TrajectoryConfig& config, const EnsembleOptions& options);

}  // namespace nopo
