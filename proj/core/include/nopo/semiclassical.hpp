#pragma once

// Mean-field dynamics of the self-phase-locked NOPO.
//
//   d alpha1/dt = -(gamma1 + i delta1) alpha1
//                 + (epsilon - lambda alpha1 alpha2) conj(alpha2) - i chi alpha2
//
// and the same with mode labels 1 <-> 2. The conjugate amplitudes are never
// evolved separately.

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "nopo/model.hpp"

namespace nopo {

struct ClassicalState {
    std::complex<double> alpha1{};
    std::complex<double> alpha2{};

    double photons1() const noexcept { return std::norm(alpha1); }
    double photons2() const noexcept { return std::norm(alpha2); }
};

struct ClassicalTrajectory {
    std::vector<double> times;
    std::vector<ClassicalState> states;

    std::size_t size() const noexcept { return times.size(); }
};

struct PulsingCriteria {
    double relative_tolerance = 1e-3;  ///< peak-to-trough over mean photon number
    double absolute_tolerance = 1e-6;  ///< peak-to-trough in photons
};

struct PulsingReport {
    bool is_pulsing = false;
    std::optional<double> period;
    double oscillation_amplitude = 0.0;  ///< peak-to-trough of |alpha1|^2
    double mean_photon_1 = 0.0;
    double mean_photon_2 = 0.0;
    /// Interpolated times of the maxima of |alpha1|^2 used for the period.
    std::vector<double> peak_times;
};

struct StabilityReport {
    double max_growth_rate = 0.0;
    bool unstable = false;
};

/// Small real seed used to kick the system off the trivial fixed point.
inline constexpr ClassicalState kDefaultSeed{{1e-3, 0.0}, {1e-3, 0.0}};
inline constexpr double kDefaultClassicalStep = 1e-3;

ClassicalState drift(const ClassicalState& state, const SystemParams& params);

/// Fixed-step RK4 from t = 0 to t_end. Records t = 0 and every
/// record_stride-th step. Throws NumericalError on blow-up.
ClassicalTrajectory integrate(const ClassicalState& initial, const SystemParams& params,
                              double dt, double t_end, std::size_t record_stride = 1);

/// Examines |alpha1(t)|^2 after discarding the leading transient_fraction of
/// the time span. The retained window must span at least 20 / gamma.
///
/// The signal counts as pulsing when its peak-to-trough range exceeds both
/// tolerances and at least three maxima are found. One maximum is taken per
/// excursion above the window mean, located by parabolic interpolation; the
/// period is the mean spacing of successive maxima.
PulsingReport classify_long_time(const ClassicalTrajectory& traj,
                                 double transient_fraction = 0.5,
                                 const PulsingCriteria& criteria = {});

/// Linear stability of alpha1 = alpha2 = 0. The linearization acts on
/// (alpha1, alpha2, conj(alpha1), conj(alpha2)); lambda drops out.
StabilityReport trivial_stability(const SystemParams& params);

/// Bisects epsilon in [epsilon_lo, epsilon_hi] for the zero crossing of the
/// trivial-solution growth rate. Throws NumericalError when the growth rate
/// does not change sign over the interval.
double numerical_threshold(const SystemParams& params, double epsilon_lo, double epsilon_hi);

}  // namespace nopo
