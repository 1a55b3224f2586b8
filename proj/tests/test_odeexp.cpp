#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sqrtsde/odeexp.hpp"
#include "support/oracles.hpp"

using namespace sqrtsde;

namespace {

void check_initial_identities(const CharSolution& s) {
    if (const auto* r = std::get_if<RealDistinctRoots>(&s.kind)) {
        EXPECT_NEAR(r->B1 + r->B2 + *s.xbar, s.x0, 1e-10 * std::max(1.0, std::abs(s.x0) + std::abs(*s.xbar)));
        EXPECT_NEAR(r->r1 * r->B1 + r->r2 * r->B2, s.xdot0, 1e-10 * std::max(1.0, std::abs(s.xdot0)));
        EXPECT_GT(s.D, 0.0);
        EXPECT_LT(r->r1, r->r2);
    } else if (const auto* c = std::get_if<ComplexRoots>(&s.kind)) {
        EXPECT_GT(c->omega, 0.0);
        EXPECT_NEAR(c->c1, s.x0 - *s.xbar, 1e-12);
    }
}

}  // namespace

TEST(SolveExpectation, ZeroSystemIsDegenerate) {
    const CharSolution s = solve_expectation(Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero(), 1.0, 2.0);
    EXPECT_TRUE(s.degenerate());
    EXPECT_FALSE(s.xbar.has_value());
    for (double t : {0.0, 0.5, 3.0}) EXPECT_NEAR(eval(s, t), 1.0, 1e-12);
}

TEST(SolveExpectation, RealDistinctExample) {
    Eigen::Matrix2d a;
    a << 0, -1, 1, 3;
    const CharSolution s = solve_expectation(a, Eigen::Vector2d(0, 1), 1.0, 0.0);
    EXPECT_DOUBLE_EQ(s.tau, 3.0);
    EXPECT_DOUBLE_EQ(s.delta, 1.0);
    EXPECT_DOUBLE_EQ(s.D, 5.0);
    EXPECT_DOUBLE_EQ(s.rho, -1.0);
    EXPECT_DOUBLE_EQ(*s.xbar, -1.0);
    ASSERT_TRUE(s.real_distinct());
    const auto& r = std::get<RealDistinctRoots>(s.kind);
    EXPECT_NEAR(r.B1 + r.B2, 2.0, 1e-12);
    EXPECT_NEAR(r.r1, 0.5 * (3 - std::sqrt(5.0)), 1e-14);
    EXPECT_NEAR(r.r2, 0.5 * (3 + std::sqrt(5.0)), 1e-14);
    double worst = 0.0;
    for (int i = 0; i <= 40; ++i) {
        const double t = 0.05 * i;
        const double ref = oracle::rk4(Eigen::MatrixXd(a), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0), t, 20000)(0);
        worst = std::max(worst, std::abs(eval(s, t) - ref) / std::max(1.0, std::abs(ref)));
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(SolveExpectation, ComplexExample) {
    Eigen::Matrix2d a;
    a << 0, 1, -5, 0;
    const CharSolution s = solve_expectation(a, Eigen::Vector2d::Zero(), 1.0, 0.0);
    ASSERT_TRUE(s.complex());
    const auto& c = std::get<ComplexRoots>(s.kind);
    EXPECT_NEAR(c.omega, std::sqrt(5.0), 1e-14);
    EXPECT_DOUBLE_EQ(c.c1, 1.0);
    EXPECT_DOUBLE_EQ(c.c2, 0.0);
    EXPECT_DOUBLE_EQ(s.D, -20.0);
    for (double t : {0.1, 0.7, 1.9}) {
        EXPECT_NEAR(eval(s, t), std::cos(std::sqrt(5.0) * t), 1e-13);
        EXPECT_NEAR(eval(s, t), oracle::rk4_x(a, Eigen::Vector2d::Zero(), 1.0, 0.0, t), 1e-9);
    }
    EXPECT_NEAR(eval(s, std::numbers::pi / std::sqrt(5.0)), -1.0, 1e-13);
}

TEST(Eval, InitialValue) {
    std::mt19937_64 g(1);
    for (int k = 0; k < 100; ++k) {
        const Eigen::Matrix2d a = oracle::random_matrix(g, 2, 2);
        const Eigen::Vector2d b = oracle::random_matrix(g, 2, 1);
        const double x0 = oracle::uniform(g, -2, 2);
        EXPECT_EQ(eval(solve_expectation(a, b, x0, 0.3), 0.0), x0);
    }
}

TEST(Eval, DegeneratePureDrift) {
    const CharSolution s = solve_expectation(Eigen::Matrix2d::Zero(), Eigen::Vector2d(1, 0), 0.0, 0.0);
    EXPECT_TRUE(s.degenerate());
    EXPECT_NEAR(eval(s, 2.0), 2.0, 1e-10);
}

TEST(Eval, DegenerateRepeatedRoot) {
    // tau = -2, Delta = 1: D = 0. x(t) = (1 + t) e^{-t} with x0 = 1, xdot0 = 0.
    Eigen::Matrix2d a;
    a << 0, 1, -1, -2;
    const CharSolution s = solve_expectation(a, Eigen::Vector2d::Zero(), 1.0, 0.0);
    EXPECT_TRUE(s.degenerate());
    for (double t : {0.3, 1.0, 2.5}) EXPECT_NEAR(eval(s, t), (1 + t) * std::exp(-t), 1e-9);
}

TEST(Eval, NegativeTimeRejected) {
    const CharSolution s = solve_expectation(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 1.0, 0.0);
    try {
        eval(s, -0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
    }
}

TEST(SolveExpectation, NonFiniteRejected) {
    EXPECT_THROW(solve_expectation(Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero(), NAN, 0.0), Error);
}

TEST(SolveExpectation, RandomAgainstRk4) {
    std::mt19937_64 g(2024);
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
        const Eigen::Matrix2d a = oracle::random_matrix(g, 2, 2, -2, 2);
        const Eigen::Vector2d b = oracle::random_matrix(g, 2, 1, -2, 2);
        const double x0 = oracle::uniform(g, -2, 2), y0 = oracle::uniform(g, -2, 2);
        const CharSolution s = solve_expectation(a, b, x0, y0);
        check_initial_identities(s);
        for (double t : {0.1, 0.5, 1.0, 2.0}) {
            const double ref = oracle::rk4_x(a, b, x0, y0, t);
            const double got = eval(s, t);
            EXPECT_LT(std::abs(got - ref), 1e-7 * std::max(1.0, std::abs(ref)))
                << kind_name(s) << " k=" << k << " t=" << t;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 4000);
}

TEST(SolveExpectation, KindStableUnderTinyPerturbation) {
    std::mt19937_64 g(7);
    int tested = 0;
    for (int k = 0; k < 2000; ++k) {
        const Eigen::Matrix2d a = oracle::random_matrix(g, 2, 2, -2, 2);
        const CharSolution s = solve_expectation(a, Eigen::Vector2d::Zero(), 1.0, 0.0);
        if (std::abs(s.D) <= 1e-8 || s.degenerate()) continue;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (double e : {1e-14, -1e-14}) {
                    Eigen::Matrix2d ap = a;
                    ap(i, j) += e;
                    const CharSolution sp = solve_expectation(ap, Eigen::Vector2d::Zero(), 1.0, 0.0);
                    EXPECT_EQ(s.real_distinct(), sp.real_distinct());
                    EXPECT_EQ(s.complex(), sp.complex());
                }
            }
        }
        ++tested;
    }
    EXPECT_GT(tested, 1500);
}

TEST(IntegrateExpectation, BothCoordinates) {
    Eigen::Matrix2d a;
    a << -1, 0.5, 0.3, -0.7;
    const Eigen::Vector2d b(0.2, 0.4);
    const CharSolution s = solve_expectation(a, b, 1.0, -0.5);
    const Eigen::Vector2d got = integrate_expectation(s, 1.3);
    const Eigen::VectorXd ref = oracle::rk4(Eigen::MatrixXd(a), Eigen::VectorXd(b), Eigen::Vector2d(1.0, -0.5), 1.3, 20000);
    EXPECT_NEAR(got(0), ref(0), 1e-9);
    EXPECT_NEAR(got(1), ref(1), 1e-9);
    EXPECT_NEAR(got(0), eval(s, 1.3), 1e-9);
}

TEST(B2Asymptotic, NegativeForLargeA22) {
    const double b2 = b2_asymptotic(-1, 1, 0, 1, 1, 1, 10);
    EXPECT_LT(b2, 0.0);
    const double two_term = -1.0 / 10 - 2.0 / 100;
    EXPECT_LT(two_term, 0.0);
    EXPECT_NEAR(b2, two_term, 0.02);
}

TEST(B2Asymptotic, MatchesClosedFormCoefficient) {
    Eigen::Matrix2d a;
    a << 0, -1, 1, 10;
    const CharSolution s = solve_expectation(a, Eigen::Vector2d(0, 1), 1.0, 1.0);
    ASSERT_TRUE(s.real_distinct());
    EXPECT_NEAR(b2_asymptotic(-1, 1, 0, 1, 1, 1, 10), std::get<RealDistinctRoots>(s.kind).B2, 1e-12);
}

TEST(B2Asymptotic, ZeroInitialData) {
    EXPECT_DOUBLE_EQ(b2_asymptotic(-1, 0, 0, 0, 0, 0, 10), 0.0);
}

TEST(B2Asymptotic, LeadingOrderLimit) {
    // a22 B2 -> a12 y0 with a12 = -1, y0 = 1.
    double prev = INFINITY;
    for (double a22 : {10.0, 100.0, 1000.0}) {
        const double err = std::abs(a22 * b2_asymptotic(-1, 1, 0, 1, 1, 1, a22) - (-1.0));
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 5e-3);
}

TEST(B2Asymptotic, RegimeError) {
    // a11 = 0, a12 a21 < 0 with a22 = 0: D = 4 a12 a21 < 0.
    try {
        b2_asymptotic(-1, 1, 0, 1, 1, 1, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Regime);
    }
}
