#include "nopo/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "nopo/error.hpp"

namespace nopo {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

// Both modes share this expression, so swapping labels swaps results exactly.
cd mode_drift(cd self, cd other, double gamma, double delta, const SystemParams& p) {
    const cd gain = p.epsilon() - p.lambda() * (self * other);
    return -(gamma + kI * delta) * self + gain * std::conj(other) - kI * p.chi() * other;
}

ClassicalState axpy(const ClassicalState& y, double h, const ClassicalState& k) {
    return {y.alpha1 + h * k.alpha1, y.alpha2 + h * k.alpha2};
}

}  // namespace

ClassicalState drift(const ClassicalState& s, const SystemParams& p) {
    return {mode_drift(s.alpha1, s.alpha2, p.gamma1(), p.delta1(), p),
            mode_drift(s.alpha2, s.alpha1, p.gamma2(), p.delta2(), p)};
}

ClassicalTrajectory integrate(const ClassicalState& initial, const SystemParams& params,
                              double dt, double t_end, std::size_t record_stride) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(t_end >= dt)) throw ValidationError("t_end must be at least dt");
    if (record_stride == 0) throw ValidationError("record_stride must be at least 1");

    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    ClassicalTrajectory traj;
    traj.times.reserve(steps / record_stride + 2);
    traj.states.reserve(steps / record_stride + 2);
    traj.times.push_back(0.0);
    traj.states.push_back(initial);

    ClassicalState y = initial;
    for (std::size_t step = 1; step <= steps; ++step) {
        const ClassicalState k1 = drift(y, params);
        const ClassicalState k2 = drift(axpy(y, 0.5 * dt, k1), params);
        const ClassicalState k3 = drift(axpy(y, 0.5 * dt, k2), params);
        const ClassicalState k4 = drift(axpy(y, dt, k3), params);
        y.alpha1 += (dt / 6.0) * (k1.alpha1 + 2.0 * k2.alpha1 + 2.0 * k3.alpha1 + k4.alpha1);
        y.alpha2 += (dt / 6.0) * (k1.alpha2 + 2.0 * k2.alpha2 + 2.0 * k3.alpha2 + k4.alpha2);

        const double t = static_cast<double>(step) * dt;
        if (!std::isfinite(std::norm(y.alpha1)) || !std::isfinite(std::norm(y.alpha2))) {
            std::ostringstream msg;
            msg << "semiclassical integration blew up at t = " << t;
            throw NumericalError(msg.str());
        }
        if (step % record_stride == 0 || step == steps) {
            traj.times.push_back(t);
            traj.states.push_back(y);
        }
    }
    return traj;
}

PulsingReport classify_long_time(const ClassicalTrajectory& traj, double transient_fraction,
                                 const PulsingCriteria& criteria) {
    if (traj.times.size() != traj.states.size()) {
        throw ValidationError("trajectory times and states differ in length");
    }
    if (!(transient_fraction >= 0.0 && transient_fraction < 1.0)) {
        throw ValidationError("transient_fraction must lie in [0, 1)");
    }
    if (traj.size() < 3) throw ValidationError("trajectory too short");

    const double t0 = traj.times.front();
    const double t1 = traj.times.back();
    const double t_cut = t0 + transient_fraction * (t1 - t0);
    if (t1 - t_cut < 20.0) throw ValidationError("trajectory too short");

    const auto first = static_cast<std::size_t>(
        std::lower_bound(traj.times.begin(), traj.times.end(), t_cut) - traj.times.begin());
    const std::size_t count = traj.size() - first;

    std::vector<double> n1(count);
    double sum1 = 0.0;
    double sum2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        n1[i] = traj.states[first + i].photons1();
        sum1 += n1[i];
        sum2 += traj.states[first + i].photons2();
    }

    PulsingReport report;
    report.mean_photon_1 = sum1 / static_cast<double>(count);
    report.mean_photon_2 = sum2 / static_cast<double>(count);
    const auto [lo, hi] = std::minmax_element(n1.begin(), n1.end());
    report.oscillation_amplitude = *hi - *lo;

    const bool varies = report.oscillation_amplitude > criteria.relative_tolerance * report.mean_photon_1 &&
                        report.oscillation_amplitude > criteria.absolute_tolerance;
    if (!varies) return report;

    // One maximum per excursion above the mean. Crossings use a small
    // hysteresis band so ripple near the mean does not split an excursion;
    // an excursion cut off by the window edge is dropped.
    const double mean = report.mean_photon_1;
    const double band = 0.05 * report.oscillation_amplitude;
    bool inside = n1.front() > mean - band;
    bool complete = false;
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i) {
        if (!inside) {
            if (n1[i] > mean + band) {
                inside = true;
                complete = true;
                best = i;
            }
            continue;
        }
        if (n1[i] > n1[best]) best = i;
        if (n1[i] < mean - band) {
            inside = false;
            if (complete && best > 0 && best + 1 < count) {
                const double ym = n1[best - 1];
                const double y0 = n1[best];
                const double yp = n1[best + 1];
                const double denom = ym - 2.0 * y0 + yp;
                const double shift = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
                const double h = traj.times[first + best + 1] - traj.times[first + best];
                report.peak_times.push_back(traj.times[first + best] + shift * h);
            }
        }
    }

    if (report.peak_times.size() < 3) {
        report.peak_times.clear();
        return report;
    }
    report.is_pulsing = true;
    report.period = (report.peak_times.back() - report.peak_times.front()) /
                    static_cast<double>(report.peak_times.size() - 1);
    return report;
}

StabilityReport trivial_stability(const SystemParams& p) {
    const cd eps = p.epsilon();
    const cd ichi = kI * p.chi();
    Eigen::Matrix4cd jac = Eigen::Matrix4cd::Zero();
    // Ordering: alpha1, alpha2, conj(alpha1), conj(alpha2).
    jac(0, 0) = -(p.gamma1() + kI * p.delta1());
    jac(1, 1) = -(p.gamma2() + kI * p.delta2());
    jac(2, 2) = -(p.gamma1() - kI * p.delta1());
    jac(3, 3) = -(p.gamma2() - kI * p.delta2());
    jac(0, 1) = -ichi;
    jac(1, 0) = -ichi;
    jac(2, 3) = ichi;
    jac(3, 2) = ichi;
    jac(0, 3) = eps;
    jac(1, 2) = eps;
    jac(2, 1) = eps;
    jac(3, 0) = eps;

    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(jac, false);
    StabilityReport report;
    report.max_growth_rate = solver.eigenvalues().real().maxCoeff();
    report.unstable = report.max_growth_rate > 0.0;
    return report;
}

double numerical_threshold(const SystemParams& params, double epsilon_lo, double epsilon_hi) {
    if (!(epsilon_lo >= 0.0 && epsilon_hi > epsilon_lo)) {
        throw ValidationError("epsilon range must satisfy 0 <= lo < hi");
    }
    auto growth = [&](double eps) {
        return trivial_stability(params.with_epsilon(eps)).max_growth_rate;
    };
    double lo = epsilon_lo;
    double hi = epsilon_hi;
    double g_lo = growth(lo);
    const double g_hi = growth(hi);
    if (g_lo == 0.0) return lo;
    if (g_hi == 0.0) return hi;
    if ((g_lo > 0.0) == (g_hi > 0.0)) {
        throw NumericalError("growth rate has no sign change in epsilon range");
    }

    constexpr double tol = 1e-9;
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double g = growth(mid);
        if (std::abs(g) < tol) break;
        if ((g > 0.0) == (g_lo > 0.0)) {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    return mid;
}

}  // namespace nopo
