#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nopo/fockspace.hpp"
#include "nopo/qsd.hpp"

namespace nopo {

struct GridSpec {
    double x_max = 3.0;  ///< axes span [-x_max, x_max] in both Re and Im
    int points = 101;    ///< per axis, at least 21
};

/// x_max = max(3, 1.5 * max semiclassical |alpha|).
GridSpec default_grid(double max_classical_amplitude);

struct WignerGrid {
    std::vector<double> re_axis;
    std::vector<double> im_axis;
    /// values(i, j) = W(re_axis[i] + i im_axis[j]).
    Eigen::MatrixXd values;
    std::string source;
    double max_imaginary_residue = 0.0;

    double spacing() const { return re_axis.size() > 1 ? re_axis[1] - re_axis[0] : 0.0; }
    /// Riemann sum of W over the grid.
    double normalization() const;
};

/// Wigner function of a single-mode density matrix from its Fock-basis
/// expansion in associated Laguerre polynomials. Throws ValidationError for
/// a two-mode matrix or fewer than 21 points per axis.
WignerGrid wigner(const DensityMatrix& rho, const GridSpec& grid, std::string source = {});

/// Pointwise value of the same expansion.
double wigner_at(const DensityMatrix& rho, std::complex<double> alpha);

struct PeakReport {
    int peak_count = 0;
    std::vector<std::complex<double>> peak_locations;  ///< strongest first
    bool inversion_symmetric = false;
    bool is_ring = false;
    std::optional<double> ring_radius;
};

/// Peaks are cells above 10% of the global maximum that are the maximum of
/// the 7 x 7 window around them (interior cells only), kept greedily from the
/// strongest down when at least 3 cells away from every kept peak. The peak set is inversion symmetric when alpha -> -alpha maps
/// it onto itself within one cell. A ring is reported when the profile of
/// radial maxima varies by less than a factor of two with angle and W at the
/// origin is below half the global maximum.
PeakReport peak_analysis(const WignerGrid& w);

struct EntanglementReport {
    double v_plus = 1.0;
    double v_minus = 1.0;
    double v = 1.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
};

/// V_- = Var(X1(theta1) - X2(theta2)), V_+ = Var(Y1(theta1) + Y2(theta2)) with
/// X(theta) = (a e^{-i theta} + a^+ e^{i theta}) / sqrt(2), Y(theta) = X(theta + pi/2).
/// Vacuum gives V_+ = V_- = 1. Throws ValidationError on non-finite moments.
EntanglementReport entanglement_at(const TwoModeMoments& m, double theta1, double theta2);

/// With optimize, minimizes V over both angles: 64 x 64 grid, then a compass
/// search refined to 1e-10 rad.
EntanglementReport entanglement_variance(const TwoModeMoments& m, bool optimize = true);
EntanglementReport entanglement_variance(const DensityMatrix& rho, bool optimize = true);

struct VarianceEstimate {
    EntanglementReport report;
    double standard_error = 0.0;  ///< grouped jackknife at the report's angles
};

/// V(t) for every recorded time of an ensemble.
std::vector<VarianceEstimate> entanglement_series(const EnsembleStats& stats, bool optimize = true);

}  // namespace nopo
