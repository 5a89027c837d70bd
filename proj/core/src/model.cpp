#include "nopo/model.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "nopo/error.hpp"

namespace nopo {

namespace {

void require_finite(double value, const char* name) {
    if (!std::isfinite(value)) {
        throw ValidationError(std::string(name) + " must be finite");
    }
}

}  // namespace

SystemParams validate(const RawParams& raw) {
    require_finite(raw.gamma1, "gamma1");
    require_finite(raw.gamma2, "gamma2");
    require_finite(raw.delta1, "delta1");
    require_finite(raw.delta2, "delta2");
    require_finite(raw.chi, "chi");
    require_finite(raw.epsilon, "epsilon");
    require_finite(raw.lambda, "lambda");
    if (raw.gamma1 <= 0.0) throw ValidationError("gamma1 must be positive");
    if (raw.gamma2 <= 0.0) throw ValidationError("gamma2 must be positive");
    if (raw.epsilon < 0.0) throw ValidationError("epsilon must be nonnegative");
    if (raw.lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    return SystemParams(raw);
}

SystemParams SystemParams::with_epsilon(double epsilon) const {
    RawParams r = raw_;
    r.epsilon = epsilon;
    return validate(r);
}

SystemParams SystemParams::with_lambda(double lambda) const {
    RawParams r = raw_;
    r.lambda = lambda;
    return validate(r);
}

SystemParams SystemParams::swapped_modes() const {
    RawParams r = raw_;
    std::swap(r.gamma1, r.gamma2);
    std::swap(r.delta1, r.delta2);
    return SystemParams(r);
}

RegimeReport locking_condition(const SystemParams& p) {
    RegimeReport report;
    report.locking_lhs = 4.0 * p.chi() * p.chi() * p.delta1() * p.delta2();
    const double mismatch = p.gamma1() * p.delta2() - p.gamma2() * p.delta1();
    report.locking_rhs = mismatch * mismatch;
    report.is_stationary_regime = report.locking_lhs > report.locking_rhs;
    return report;
}

double threshold_equal_detunings(const SystemParams& p) {
    constexpr double tol = 1e-12;
    if (std::abs(p.gamma1() - p.gamma2()) > tol || std::abs(p.delta1() - p.delta2()) > tol) {
        throw ValidationError("closed form requires equal detunings and dampings");
    }
    return std::hypot(p.chi() - std::abs(p.delta1()), p.gamma1());
}

}  // namespace nopo
