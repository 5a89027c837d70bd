#pragma once

// Truncated two-mode Fock space.
//
// Basis ordering is mode-1-major: |n1, n2> sits at index n1 * (n_max2 + 1) + n2.
// Operators and states are dense; the trajectory integrator keeps its own
// sparse copies (see qsd.hpp).

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nopo {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class Mode { one = 1, two = 2 };

/// Throws ValidationError("invalid mode index") for anything but 1 or 2.
Mode to_mode(int index);

class FockSpace {
public:
    FockSpace(int n_max1, int n_max2);

    int n_max1() const noexcept { return n_max1_; }
    int n_max2() const noexcept { return n_max2_; }
    int cutoff(Mode mode) const noexcept { return mode == Mode::one ? n_max1_ : n_max2_; }
    int dim() const noexcept { return (n_max1_ + 1) * (n_max2_ + 1); }
    int index(int n1, int n2) const noexcept { return n1 * (n_max2_ + 1) + n2; }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    int n_max1_;
    int n_max2_;
};

class ModeOperator {
public:
    ModeOperator(FockSpace space, CMatrix matrix);

    const FockSpace& space() const noexcept { return space_; }
    const CMatrix& matrix() const noexcept { return matrix_; }

    ModeOperator adjoint() const;

    friend ModeOperator operator*(const ModeOperator& a, const ModeOperator& b);
    friend ModeOperator operator+(const ModeOperator& a, const ModeOperator& b);
    friend ModeOperator operator-(const ModeOperator& a, const ModeOperator& b);
    friend ModeOperator operator*(std::complex<double> s, const ModeOperator& a);

private:
    FockSpace space_;
    CMatrix matrix_;
};

ModeOperator identity(const FockSpace& space);
/// Lowering operator of one mode, tensored with the identity on the other.
ModeOperator annihilation(const FockSpace& space, Mode mode);
ModeOperator number(const FockSpace& space, Mode mode);

struct StateVector {
    FockSpace space;
    CVector amplitudes;

    double norm() const { return amplitudes.norm(); }
    void normalize();
    std::complex<double> at(int n1, int n2) const { return amplitudes(space.index(n1, n2)); }
};

StateVector vacuum(const FockSpace& space);
StateVector fock_state(const FockSpace& space, int n1, int n2);
/// Product of truncated coherent expansions, renormalized. Requires
/// |alpha|^2 + 5|alpha| < n_max for each mode; throws TruncationError
/// otherwise.
StateVector coherent_state(const FockSpace& space, std::complex<double> alpha1,
                           std::complex<double> alpha2);

enum class DensityKind { single_mode, two_mode };

struct DensityMatrix {
    CMatrix matrix;
    DensityKind kind = DensityKind::two_mode;
    /// Two-mode space for two_mode matrices; for single_mode only the kept
    /// mode's cutoff is meaningful and equals matrix.rows() - 1.
    FockSpace space{1, 1};

    double trace() const { return matrix.trace().real(); }
    double purity() const { return (matrix * matrix).trace().real(); }
};

struct DensityDiagnostics {
    double hermiticity_error = 0.0;  ///< max |rho - rho^dagger|
    double trace = 0.0;
    double min_eigenvalue = 0.0;

    /// Hermitian within 1e-10, unit trace within 1e-8, eigenvalues >= -1e-8.
    bool valid() const noexcept;
};

DensityDiagnostics diagnose(const DensityMatrix& rho);

DensityMatrix single_mode_density(CMatrix matrix);

std::complex<double> expectation(const StateVector& state, const ModeOperator& op);
std::complex<double> expectation(const DensityMatrix& rho, const ModeOperator& op);

/// rho = (1/N) sum_i |psi_i><psi_i|. Throws ValidationError for an empty
/// ensemble or mixed spaces.
DensityMatrix density_from_ensemble(std::span<const StateVector> states);

DensityMatrix partial_trace(const DensityMatrix& rho, Mode keep);

/// Largest population held in the top two Fock levels of either mode.
double top_level_population(const StateVector& state);

inline constexpr double kTruncationWarningLevel = 1e-6;

/// First and second moments of the two subharmonic modes.
struct TwoModeMoments {
    std::complex<double> a1{};
    std::complex<double> a2{};
    std::complex<double> a1a1{};
    std::complex<double> a2a2{};
    std::complex<double> a1a2{};
    std::complex<double> a1dag_a2{};
    double n1 = 0.0;
    double n2 = 0.0;
};

TwoModeMoments moments(const StateVector& state);
TwoModeMoments moments(const DensityMatrix& rho);

}  // namespace nopo
