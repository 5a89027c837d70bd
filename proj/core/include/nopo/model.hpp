#pragma once

// Model parameters of the pump-eliminated self-phase-locked NOPO.
//
// All rates and detunings are in units of the subharmonic damping rate
// (gamma1 = gamma2 = 1 by default); time is in units of 1/gamma.

namespace nopo {

/// Unvalidated parameter record, e.g. straight from a config file.
struct RawParams {
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double chi = 0.0;
    double epsilon = 0.0;  ///< effective pump k E / gamma3
    double lambda = 0.0;   ///< effective nonlinearity k^2 / gamma3
};

/// Validated parameters. Only obtainable through validate(), so any
/// SystemParams in hand satisfies the positivity/finiteness invariants.
class SystemParams {
public:
    double gamma1() const noexcept { return raw_.gamma1; }
    double gamma2() const noexcept { return raw_.gamma2; }
    double delta1() const noexcept { return raw_.delta1; }
    double delta2() const noexcept { return raw_.delta2; }
    double chi() const noexcept { return raw_.chi; }
    double epsilon() const noexcept { return raw_.epsilon; }
    double lambda() const noexcept { return raw_.lambda; }

    const RawParams& raw() const noexcept { return raw_; }

    SystemParams with_epsilon(double epsilon) const;
    SystemParams with_lambda(double lambda) const;
    /// Exchanges the mode labels: (gamma1, delta1) <-> (gamma2, delta2).
    SystemParams swapped_modes() const;

    friend SystemParams validate(const RawParams& raw);

private:
    explicit SystemParams(const RawParams& raw) : raw_(raw) {}
    RawParams raw_;
};

/// Throws ValidationError naming the offending field.
SystemParams validate(const RawParams& raw);

struct RegimeReport {
    double locking_lhs = 0.0;  ///< 4 chi^2 delta1 delta2
    double locking_rhs = 0.0;  ///< (gamma1 delta2 - gamma2 delta1)^2
    bool is_stationary_regime = false;
};

/// Phase-locking condition for stationary above-threshold operation.
/// The inequality is strict; lhs == rhs counts as non-stationary.
RegimeReport locking_condition(const SystemParams& params);

/// Oscillation threshold sqrt((chi - |delta|)^2 + gamma^2), valid only for
/// gamma1 == gamma2 and delta1 == delta2 (to 1e-12). Throws ValidationError
/// otherwise.
double threshold_equal_detunings(const SystemParams& params);

}  // namespace nopo
