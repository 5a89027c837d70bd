#include "nopo/fockspace.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "nopo/error.hpp"

namespace nopo {

namespace {

using cd = std::complex<double>;

void require_same_space(const FockSpace& a, const FockSpace& b) {
    if (!(a == b)) throw ValidationError("dimension mismatch between Fock spaces");
}

CMatrix single_lowering(int n_max) {
    CMatrix a = CMatrix::Zero(n_max + 1, n_max + 1);
    for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace

Mode to_mode(int index) {
    if (index == 1) return Mode::one;
    if (index == 2) return Mode::two;
    throw ValidationError("invalid mode index");
}

FockSpace::FockSpace(int n_max1, int n_max2) : n_max1_(n_max1), n_max2_(n_max2) {
    if (n_max1 < 1 || n_max2 < 1) throw ValidationError("n_max must be at least 1 for each mode");
}

ModeOperator::ModeOperator(FockSpace space, CMatrix matrix)
    : space_(space), matrix_(std::move(matrix)) {
    if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim()) {
        throw ValidationError("operator dimension does not match its Fock space");
    }
}

ModeOperator ModeOperator::adjoint() const { return {space_, matrix_.adjoint()}; }

ModeOperator operator*(const ModeOperator& a, const ModeOperator& b) {
    require_same_space(a.space_, b.space_);
    return {a.space_, a.matrix_ * b.matrix_};
}

ModeOperator operator+(const ModeOperator& a, const ModeOperator& b) {
    require_same_space(a.space_, b.space_);
    return {a.space_, a.matrix_ + b.matrix_};
}

ModeOperator operator-(const ModeOperator& a, const ModeOperator& b) {
    require_same_space(a.space_, b.space_);
    return {a.space_, a.matrix_ - b.matrix_};
}

ModeOperator operator*(cd s, const ModeOperator& a) { return {a.space_, s * a.matrix_}; }

ModeOperator identity(const FockSpace& space) {
    return {space, CMatrix::Identity(space.dim(), space.dim())};
}

ModeOperator annihilation(const FockSpace& space, Mode mode) {
    const CMatrix id1 = CMatrix::Identity(space.n_max1() + 1, space.n_max1() + 1);
    const CMatrix id2 = CMatrix::Identity(space.n_max2() + 1, space.n_max2() + 1);
    if (mode == Mode::one) return {space, kron(single_lowering(space.n_max1()), id2)};
    return {space, kron(id1, single_lowering(space.n_max2()))};
}

ModeOperator number(const FockSpace& space, Mode mode) {
    const ModeOperator a = annihilation(space, mode);
    return a.adjoint() * a;
}

void StateVector::normalize() {
    const double n = amplitudes.norm();
    if (n == 0.0) throw NumericalError("cannot normalize a zero state");
    amplitudes /= n;
}

StateVector vacuum(const FockSpace& space) { return fock_state(space, 0, 0); }

StateVector fock_state(const FockSpace& space, int n1, int n2) {
    if (n1 < 0 || n2 < 0 || n1 > space.n_max1() || n2 > space.n_max2()) {
        throw ValidationError("Fock occupation outside the truncated space");
    }
    StateVector s{space, CVector::Zero(space.dim())};
    s.amplitudes(space.index(n1, n2)) = 1.0;
    return s;
}

StateVector coherent_state(const FockSpace& space, cd alpha1, cd alpha2) {
    auto expansion = [](cd alpha, int n_max) {
        const double r = std::abs(alpha);
        if (!(r * r + 5.0 * r < n_max)) {
            throw TruncationError("truncation inadequate for coherent amplitude");
        }
        CVector c(n_max + 1);
        c(0) = std::exp(-0.5 * r * r);
        for (int n = 1; n <= n_max; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
        return c;
    };
    const CVector c1 = expansion(alpha1, space.n_max1());
    const CVector c2 = expansion(alpha2, space.n_max2());
    StateVector s{space, CVector(space.dim())};
    for (int n1 = 0; n1 <= space.n_max1(); ++n1) {
        for (int n2 = 0; n2 <= space.n_max2(); ++n2) s.amplitudes(space.index(n1, n2)) = c1(n1) * c2(n2);
    }
    s.normalize();
    return s;
}

bool DensityDiagnostics::valid() const noexcept {
    return hermiticity_error <= 1e-10 && std::abs(trace - 1.0) <= 1e-8 && min_eigenvalue >= -1e-8;
}

DensityDiagnostics diagnose(const DensityMatrix& rho) {
    DensityDiagnostics d;
    d.hermiticity_error = (rho.matrix - rho.matrix.adjoint()).cwiseAbs().maxCoeff();
    d.trace = rho.trace();
    const CMatrix herm = 0.5 * (rho.matrix + rho.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = solver.eigenvalues().minCoeff();
    return d;
}

DensityMatrix single_mode_density(CMatrix matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 2) {
        throw ValidationError("single-mode density matrix must be square with cutoff >= 1");
    }
    const int n_max = static_cast<int>(matrix.rows()) - 1;
    return {std::move(matrix), DensityKind::single_mode, FockSpace(n_max, n_max)};
}

cd expectation(const StateVector& state, const ModeOperator& op) {
    require_same_space(state.space, op.space());
    return state.amplitudes.dot(op.matrix() * state.amplitudes);
}

cd expectation(const DensityMatrix& rho, const ModeOperator& op) {
    if (rho.kind != DensityKind::two_mode) {
        throw ValidationError("two-mode operator applied to a single-mode density matrix");
    }
    require_same_space(rho.space, op.space());
    return (rho.matrix * op.matrix()).trace();
}

DensityMatrix density_from_ensemble(std::span<const StateVector> states) {
    if (states.empty()) throw ValidationError("empty ensemble");
    const FockSpace space = states.front().space;
    CMatrix columns(space.dim(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        require_same_space(space, states[i].space);
        columns.col(static_cast<Eigen::Index>(i)) = states[i].amplitudes;
    }
    CMatrix rho = columns * columns.adjoint();
    rho /= static_cast<double>(states.size());
    return {std::move(rho), DensityKind::two_mode, space};
}

DensityMatrix partial_trace(const DensityMatrix& rho, Mode keep) {
    if (rho.kind != DensityKind::two_mode) {
        throw ValidationError("partial trace needs a two-mode density matrix");
    }
    const FockSpace& s = rho.space;
    const int kept = s.cutoff(keep) + 1;
    const int traced = (keep == Mode::one ? s.n_max2() : s.n_max1()) + 1;
    CMatrix reduced = CMatrix::Zero(kept, kept);
    for (int i = 0; i < kept; ++i) {
        for (int j = 0; j < kept; ++j) {
            cd sum = 0.0;
            for (int k = 0; k < traced; ++k) {
                sum += keep == Mode::one ? rho.matrix(s.index(i, k), s.index(j, k))
                                         : rho.matrix(s.index(k, i), s.index(k, j));
            }
            reduced(i, j) = sum;
        }
    }
    return single_mode_density(std::move(reduced));
}

double top_level_population(const StateVector& state) {
    const FockSpace& s = state.space;
    double top1 = 0.0;
    double top2 = 0.0;
    for (int n1 = 0; n1 <= s.n_max1(); ++n1) {
        for (int n2 = 0; n2 <= s.n_max2(); ++n2) {
            const double p = std::norm(state.amplitudes(s.index(n1, n2)));
            if (n1 >= s.n_max1() - 1) top1 += p;
            if (n2 >= s.n_max2() - 1) top2 += p;
        }
    }
    return std::max(top1, top2);
}

TwoModeMoments moments(const StateVector& state) {
    const FockSpace& s = state.space;
    const CVector& psi = state.amplitudes;
    const int m1 = s.n_max1();
    const int m2 = s.n_max2();
    TwoModeMoments m;
    for (int n1 = 0; n1 <= m1; ++n1) {
        const double r1 = std::sqrt(static_cast<double>(n1 + 1));
        for (int n2 = 0; n2 <= m2; ++n2) {
            const double r2 = std::sqrt(static_cast<double>(n2 + 1));
            const cd bra = std::conj(psi(s.index(n1, n2)));
            const double p = std::norm(psi(s.index(n1, n2)));
            m.n1 += n1 * p;
            m.n2 += n2 * p;
            if (n1 < m1) {
                m.a1 += bra * r1 * psi(s.index(n1 + 1, n2));
                if (n2 < m2) {
                    m.a1a2 += bra * r1 * r2 * psi(s.index(n1 + 1, n2 + 1));
                    m.a1dag_a2 += std::conj(psi(s.index(n1 + 1, n2))) * r1 * r2 * psi(s.index(n1, n2 + 1));
                }
                if (n1 + 1 < m1) {
                    m.a1a1 += bra * r1 * std::sqrt(static_cast<double>(n1 + 2)) * psi(s.index(n1 + 2, n2));
                }
            }
            if (n2 < m2) {
                m.a2 += bra * r2 * psi(s.index(n1, n2 + 1));
                if (n2 + 1 < m2) {
                    m.a2a2 += bra * r2 * std::sqrt(static_cast<double>(n2 + 2)) * psi(s.index(n1, n2 + 2));
                }
            }
        }
    }
    return m;
}

TwoModeMoments moments(const DensityMatrix& rho) {
    const ModeOperator a1 = annihilation(rho.space, Mode::one);
    const ModeOperator a2 = annihilation(rho.space, Mode::two);
    TwoModeMoments m;
    m.a1 = expectation(rho, a1);
    m.a2 = expectation(rho, a2);
    m.a1a1 = expectation(rho, a1 * a1);
    m.a2a2 = expectation(rho, a2 * a2);
    m.a1a2 = expectation(rho, a1 * a2);
    m.a1dag_a2 = expectation(rho, a1.adjoint() * a2);
    m.n1 = expectation(rho, a1.adjoint() * a1).real();
    m.n2 = expectation(rho, a2.adjoint() * a2).real();
    return m;
}

}  // namespace nopo
