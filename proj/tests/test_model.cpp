#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "nopo/error.hpp"
#include "nopo/model.hpp"

namespace {

using nopo::RawParams;
using nopo::validate;

RawParams params(double d1, double d2, double chi, double eps) {
    RawParams r;
    r.delta1 = d1;
    r.delta2 = d2;
    r.chi = chi;
    r.epsilon = eps;
    r.lambda = 0.1;
    return r;
}

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const nopo::ValidationError& e) {
        return e.what();
    }
    return {};
}

TEST(Validate, AcceptsDefaultsAndKeepsValues) {
    const auto p = validate(params(10, -5, 0.1, 4));
    EXPECT_EQ(p.gamma1(), 1.0);
    EXPECT_EQ(p.delta2(), -5.0);
    EXPECT_EQ(p.epsilon(), 4.0);
    EXPECT_EQ(p.lambda(), 0.1);
}

TEST(Validate, NamesTheOffendingField) {
    RawParams r;
    r.gamma1 = 0.0;
    EXPECT_NE(error_of([&] { validate(r); }).find("gamma1"), std::string::npos);
    r = {};
    r.gamma2 = -1.0;
    EXPECT_NE(error_of([&] { validate(r); }).find("gamma2"), std::string::npos);
    r = {};
    r.lambda = -0.1;
    EXPECT_EQ(error_of([&] { validate(r); }), "lambda must be nonnegative");
    r = {};
    r.epsilon = std::numeric_limits<double>::quiet_NaN();
    EXPECT_NE(error_of([&] { validate(r); }).find("epsilon"), std::string::npos);
    r = {};
    r.delta1 = std::numeric_limits<double>::infinity();
    EXPECT_NE(error_of([&] { validate(r); }).find("delta1"), std::string::npos);
}

TEST(Validate, DerivedParamsAreRevalidated) {
    const auto p = validate(params(1, 1, 0.1, 1));
    EXPECT_THROW(p.with_lambda(-1.0), nopo::ValidationError);
    EXPECT_EQ(p.with_epsilon(2.5).epsilon(), 2.5);
}

TEST(Validate, SwappedModesExchangesLabels) {
    RawParams r = params(3, -7, 0.2, 1);
    r.gamma1 = 0.5;
    r.gamma2 = 2.0;
    const auto s = validate(r).swapped_modes();
    EXPECT_EQ(s.delta1(), -7.0);
    EXPECT_EQ(s.delta2(), 3.0);
    EXPECT_EQ(s.gamma1(), 2.0);
    EXPECT_EQ(s.gamma2(), 0.5);
    EXPECT_EQ(s.chi(), 0.2);
}

TEST(Locking, FigureParameterSets) {
    EXPECT_TRUE(nopo::locking_condition(validate(params(10, 10, 0.1, 11))).is_stationary_regime);
    EXPECT_FALSE(nopo::locking_condition(validate(params(10, -5, 0.1, 4))).is_stationary_regime);
    EXPECT_FALSE(nopo::locking_condition(validate(params(0.1, -0.1, 0.5, 3))).is_stationary_regime);
    EXPECT_FALSE(nopo::locking_condition(validate(params(10, -10, 0.1, 1))).is_stationary_regime);
}

TEST(Locking, ReportsBothSidesOfTheSquaredInequality) {
    const auto r = nopo::locking_condition(validate(params(10, -5, 0.1, 4)));
    EXPECT_NEAR(r.locking_lhs, 4 * 0.01 * 10 * -5, 1e-12);
    EXPECT_NEAR(r.locking_rhs, 225.0, 1e-12);
}

TEST(Locking, EqualityIsNotStationary) {
    // Equal detunings and dampings make the right side vanish; chi = 0 makes
    // the left side vanish too.
    const auto r = nopo::locking_condition(validate(params(2, 2, 0.0, 1)));
    EXPECT_EQ(r.locking_lhs, 0.0);
    EXPECT_EQ(r.locking_rhs, 0.0);
    EXPECT_FALSE(r.is_stationary_regime);
}

TEST(Locking, OppositeSignDetuningsNeverLock) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int k = 0; k < 200; ++k) {
        RawParams r = params(u(rng), -u(rng), u(rng), 1.0);
        r.gamma1 = u(rng);
        r.gamma2 = u(rng);
        EXPECT_FALSE(nopo::locking_condition(validate(r)).is_stationary_regime);
    }
}

TEST(Threshold, EqualDetuningClosedForm) {
    const auto p = validate(params(10, 10, 0.1, 0));
    EXPECT_NEAR(nopo::threshold_equal_detunings(p), std::sqrt(9.9 * 9.9 + 1.0), 1e-12);
    EXPECT_NEAR(nopo::threshold_equal_detunings(validate(params(-3, -3, 0.5, 0))),
                std::sqrt(2.5 * 2.5 + 1.0), 1e-12);
    EXPECT_NEAR(nopo::threshold_equal_detunings(validate(params(0, 0, 0, 0))), 1.0, 1e-15);
}

TEST(Threshold, ClosedFormRejectsUnequalModes) {
    EXPECT_THROW(nopo::threshold_equal_detunings(validate(params(10, -10, 0.1, 0))),
                 nopo::ValidationError);
    RawParams r = params(1, 1, 0.1, 0);
    r.gamma2 = 2.0;
    EXPECT_THROW(nopo::threshold_equal_detunings(validate(r)), nopo::ValidationError);
}

}  // namespace
