#include "nopo/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "nopo/error.hpp"

namespace nopo {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Precomputed sqrt(n!/m!) for m >= n, and the associated Laguerre recursion.
class LaguerreExpansion {
public:
    explicit LaguerreExpansion(const CMatrix& rho)
        : rho_(rho), size_(static_cast<int>(rho.rows())),
          laguerre_(static_cast<std::size_t>(size_ * size_)),
          ratio_(static_cast<std::size_t>(size_ * size_)) {
        for (int n = 0; n < size_; ++n) {
            double r = 1.0;
            for (int m = n; m < size_; ++m) {
                if (m > n) r /= std::sqrt(static_cast<double>(m));
                ratio_[static_cast<std::size_t>(n * size_ + m)] = r;
            }
        }
    }

    // Full complex sum; the imaginary part is the Hermiticity residue.
    cd evaluate(cd alpha) {
        const double r2 = std::norm(alpha);
        const double x = 4.0 * r2;
        // laguerre_[k * size_ + n] = L_n^k(x), n + k < size_.
        for (int k = 0; k < size_; ++k) {
            double* l = &laguerre_[static_cast<std::size_t>(k * size_)];
            l[0] = 1.0;
            if (k + 1 < size_) l[1] = 1.0 + k - x;
            for (int n = 1; n + k + 1 < size_; ++n) {
                l[n + 1] = ((2.0 * n + 1.0 + k - x) * l[n] - (n + k) * l[n - 1]) / (n + 1.0);
            }
        }
        const double gauss = (2.0 / std::numbers::pi) * std::exp(-2.0 * r2);
        const cd two_conj = 2.0 * std::conj(alpha);

        cd total = 0.0;
        cd power = 1.0;  // (2 conj(alpha))^k
        for (int k = 0; k < size_; ++k) {
            const double* l = &laguerre_[static_cast<std::size_t>(k * size_)];
            for (int n = 0; n + k < size_; ++n) {
                const int m = n + k;
                const double sign = (n % 2 == 0) ? 1.0 : -1.0;
                const cd w = sign * ratio_[static_cast<std::size_t>(n * size_ + m)] * power * l[n];
                if (k == 0) {
                    total += rho_(n, n) * w;
                } else {
                    total += rho_(m, n) * w + rho_(n, m) * std::conj(w);
                }
            }
            power *= two_conj;
        }
        return gauss * total;
    }

private:
    const CMatrix& rho_;
    int size_;
    std::vector<double> laguerre_;
    std::vector<double> ratio_;
};

void require_single_mode(const DensityMatrix& rho) {
    if (rho.kind != DensityKind::single_mode) {
        throw ValidationError("Wigner function needs a single-mode density matrix");
    }
}

double bilinear(const WignerGrid& w, double re, double im) {
    const double h = w.spacing();
    const double fx = (re - w.re_axis.front()) / h;
    const double fy = (im - w.im_axis.front()) / h;
    const auto last = static_cast<double>(w.re_axis.size() - 1);
    if (fx < 0.0 || fy < 0.0 || fx > last || fy > last) return 0.0;
    const auto i = std::min(static_cast<Eigen::Index>(fx), w.values.rows() - 2);
    const auto j = std::min(static_cast<Eigen::Index>(fy), w.values.cols() - 2);
    const double tx = fx - static_cast<double>(i);
    const double ty = fy - static_cast<double>(j);
    return (1 - tx) * (1 - ty) * w.values(i, j) + tx * (1 - ty) * w.values(i + 1, j) +
           (1 - tx) * ty * w.values(i, j + 1) + tx * ty * w.values(i + 1, j + 1);
}

void require_finite(const TwoModeMoments& m) {
    const double probe = std::abs(m.a1) + std::abs(m.a2) + std::abs(m.a1a1) + std::abs(m.a2a2) +
                         std::abs(m.a1a2) + std::abs(m.a1dag_a2) + m.n1 + m.n2;
    if (!std::isfinite(probe)) throw ValidationError("missing or non-finite moments");
}

double wrap_angle(double theta) {
    theta = std::fmod(theta, kTwoPi);
    return theta < 0.0 ? theta + kTwoPi : theta;
}

}  // namespace

GridSpec default_grid(double max_classical_amplitude) {
    return {std::max(3.0, 1.5 * max_classical_amplitude), 101};
}

double WignerGrid::normalization() const {
    const double h = spacing();
    return values.sum() * h * h;
}

WignerGrid wigner(const DensityMatrix& rho, const GridSpec& grid, std::string source) {
    require_single_mode(rho);
    if (grid.points < 21) throw ValidationError("grid too coarse: need at least 21 points per axis");
    if (!(grid.x_max > 0.0)) throw ValidationError("grid extent must be positive");

    WignerGrid w;
    w.source = std::move(source);
    const int n = grid.points;
    w.re_axis.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        w.re_axis[static_cast<std::size_t>(i)] = -grid.x_max + 2.0 * grid.x_max * i / (n - 1);
    }
    w.im_axis = w.re_axis;
    w.values.resize(n, n);

    LaguerreExpansion expansion(rho.matrix);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const cd value = expansion.evaluate({w.re_axis[static_cast<std::size_t>(i)],
                                                 w.im_axis[static_cast<std::size_t>(j)]});
            w.values(i, j) = value.real();
            w.max_imaginary_residue = std::max(w.max_imaginary_residue, std::abs(value.imag()));
        }
    }
    return w;
}

double wigner_at(const DensityMatrix& rho, cd alpha) {
    require_single_mode(rho);
    LaguerreExpansion expansion(rho.matrix);
    return expansion.evaluate(alpha).real();
}

PeakReport peak_analysis(const WignerGrid& w) {
    PeakReport report;
    const Eigen::Index rows = w.values.rows();
    const Eigen::Index cols = w.values.cols();
    if (rows < 3 || cols < 3) return report;
    const double global_max = w.values.maxCoeff();
    if (!(global_max > 0.0)) return report;
    const double h = w.spacing();

    struct Candidate {
        double value;
        Eigen::Index i;
        Eigen::Index j;
    };
    // A candidate must dominate its (2r+1) x (2r+1) window, so ripples on a
    // plateau do not count as peaks.
    constexpr Eigen::Index r = 3;
    std::vector<Candidate> candidates;
    for (Eigen::Index i = 1; i + 1 < rows; ++i) {
        for (Eigen::Index j = 1; j + 1 < cols; ++j) {
            const double v = w.values(i, j);
            if (v < 0.1 * global_max) continue;
            bool is_max = true;
            for (Eigen::Index a = std::max<Eigen::Index>(0, i - r); a <= std::min(rows - 1, i + r) && is_max; ++a) {
                for (Eigen::Index b = std::max<Eigen::Index>(0, j - r); b <= std::min(cols - 1, j + r); ++b) {
                    if (a == i && b == j) continue;
                    const double u = w.values(a, b);
                    // Strict against earlier cells, non-strict against later
                    // ones, so a flat top yields a single maximum.
                    const bool earlier = a < i || (a == i && b < j);
                    if (earlier ? u >= v : u > v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) candidates.push_back({v, i, j});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.value > b.value; });

    std::vector<Candidate> kept;
    for (const auto& c : candidates) {
        const bool far = std::all_of(kept.begin(), kept.end(), [&](const Candidate& k) {
            const double di = static_cast<double>(c.i - k.i);
            const double dj = static_cast<double>(c.j - k.j);
            return std::sqrt(di * di + dj * dj) >= 3.0;
        });
        if (far) kept.push_back(c);
    }
    for (const auto& k : kept) {
        report.peak_locations.emplace_back(w.re_axis[static_cast<std::size_t>(k.i)],
                                           w.im_axis[static_cast<std::size_t>(k.j)]);
    }
    report.peak_count = static_cast<int>(kept.size());

    const double cell_tol = h * (1.0 + 1e-9);
    report.inversion_symmetric =
        report.peak_count > 0 &&
        std::all_of(report.peak_locations.begin(), report.peak_locations.end(), [&](cd p) {
            return std::any_of(report.peak_locations.begin(), report.peak_locations.end(), [&](cd q) {
                return std::abs(p.real() + q.real()) <= cell_tol && std::abs(p.imag() + q.imag()) <= cell_tol;
            });
        });

    // Radial-maximum profile over 180 directions.
    constexpr int kAngles = 180;
    const double r_max = w.re_axis.back();
    const double dr = 0.5 * h;
    const int radial_steps = static_cast<int>(r_max / dr);
    std::vector<double> profile(kAngles);
    std::vector<double> radius(kAngles);
    for (int a = 0; a < kAngles; ++a) {
        const double phi = kTwoPi * a / kAngles;
        double best = -std::numeric_limits<double>::infinity();
        double best_r = 0.0;
        for (int s = 0; s <= radial_steps; ++s) {
            const double r = s * dr;
            const double v = bilinear(w, r * std::cos(phi), r * std::sin(phi));
            if (v > best) {
                best = v;
                best_r = r;
            }
        }
        profile[static_cast<std::size_t>(a)] = best;
        radius[static_cast<std::size_t>(a)] = best_r;
    }
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end());
    const double at_origin = bilinear(w, 0.0, 0.0);
    report.is_ring = *hi > 0.0 && *lo > 0.5 * *hi && at_origin < 0.5 * global_max;
    if (report.is_ring) {
        double sum = 0.0;
        for (double r : radius) sum += r;
        report.ring_radius = sum / kAngles;
    }
    return report;
}

EntanglementReport entanglement_at(const TwoModeMoments& m, double theta1, double theta2) {
    require_finite(m);
    const cd rot1 = std::polar(1.0, -theta1);
    const cd rot2 = std::polar(1.0, -theta2);

    // Centered moments of A = a1 e^{-i theta1}, B = a2 e^{-i theta2}.
    const cd aa = (m.a1a1 - m.a1 * m.a1) * rot1 * rot1;
    const cd bb = (m.a2a2 - m.a2 * m.a2) * rot2 * rot2;
    const double na = m.n1 - std::norm(m.a1);
    const double nb = m.n2 - std::norm(m.a2);
    const cd ab = (m.a1a2 - m.a1 * m.a2) * rot1 * rot2;
    const cd adag_b = (m.a1dag_a2 - std::conj(m.a1) * m.a2) * std::conj(rot1) * rot2;

    const double var_x1 = aa.real() + na + 0.5;
    const double var_y1 = -aa.real() + na + 0.5;
    const double var_x2 = bb.real() + nb + 0.5;
    const double var_y2 = -bb.real() + nb + 0.5;
    const double cov_x = ab.real() + adag_b.real();
    const double cov_y = -ab.real() + adag_b.real();

    EntanglementReport r;
    r.v_minus = var_x1 + var_x2 - 2.0 * cov_x;
    r.v_plus = var_y1 + var_y2 + 2.0 * cov_y;
    r.v = 0.5 * (r.v_plus + r.v_minus);
    r.theta1 = theta1;
    r.theta2 = theta2;
    return r;
}

EntanglementReport entanglement_variance(const TwoModeMoments& m, bool optimize) {
    if (!optimize) return entanglement_at(m, 0.0, 0.0);

    constexpr int kCoarse = 64;
    EntanglementReport best = entanglement_at(m, 0.0, 0.0);
    for (int i = 0; i < kCoarse; ++i) {
        for (int j = 0; j < kCoarse; ++j) {
            const EntanglementReport r = entanglement_at(m, kTwoPi * i / kCoarse, kTwoPi * j / kCoarse);
            if (r.v < best.v) best = r;
        }
    }

    double step = kTwoPi / kCoarse;
    constexpr std::array<std::array<double, 2>, 4> directions{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (step > 1e-10) {
        bool improved = false;
        for (const auto& d : directions) {
            const EntanglementReport r =
                entanglement_at(m, best.theta1 + d[0] * step, best.theta2 + d[1] * step);
            if (r.v < best.v) {
                best = r;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    best.theta1 = wrap_angle(best.theta1);
    best.theta2 = wrap_angle(best.theta2);
    return best;
}

EntanglementReport entanglement_variance(const DensityMatrix& rho, bool optimize) {
    if (rho.kind != DensityKind::two_mode) {
        throw ValidationError("missing moments: entanglement needs a two-mode density matrix");
    }
    return entanglement_variance(moments(rho), optimize);
}

std::vector<VarianceEstimate> entanglement_series(const EnsembleStats& stats, bool optimize) {
    std::vector<VarianceEstimate> series;
    series.reserve(stats.times.size());

    const std::size_t groups = stats.group_means.size();
    const std::size_t n = stats.trajectory_count;
    std::vector<double> weight(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        weight[g] = static_cast<double>((n - g + groups - 1) / groups);
    }

    for (std::size_t t = 0; t < stats.times.size(); ++t) {
        VarianceEstimate est;
        est.report = entanglement_variance(stats.mean[t], optimize);
        if (groups > 1) {
            // Leave-one-group-out means, evaluated at the full-sample angles.
            std::vector<double> loo(groups);
            double loo_mean = 0.0;
            for (std::size_t g = 0; g < groups; ++g) {
                const double rest = static_cast<double>(n) - weight[g];
                auto drop = [&](auto full, auto part) {
                    return (full * static_cast<double>(n) - part * weight[g]) / rest;
                };
                const TwoModeMoments& full = stats.mean[t];
                const TwoModeMoments& part = stats.group_means[g][t];
                TwoModeMoments m;
                m.a1 = drop(full.a1, part.a1);
                m.a2 = drop(full.a2, part.a2);
                m.a1a1 = drop(full.a1a1, part.a1a1);
                m.a2a2 = drop(full.a2a2, part.a2a2);
                m.a1a2 = drop(full.a1a2, part.a1a2);
                m.a1dag_a2 = drop(full.a1dag_a2, part.a1dag_a2);
                m.n1 = drop(full.n1, part.n1);
                m.n2 = drop(full.n2, part.n2);
                loo[g] = entanglement_at(m, est.report.theta1, est.report.theta2).v;
                loo_mean += loo[g];
            }
            loo_mean /= static_cast<double>(groups);
            double spread = 0.0;
            for (double v : loo) spread += (v - loo_mean) * (v - loo_mean);
            const double g = static_cast<double>(groups);
            est.standard_error = std::sqrt((g - 1.0) / g * spread);
        }
        series.push_back(est);
    }
    return series;
}

}  // namespace nopo
