#pragma once

#include <cmath>
#include <optional>
#include <variant>

#include "sqrtsde/linear_ode.hpp"
#include "sqrtsde/model.hpp"

namespace sqrtsde {

// Closed form of the first coordinate of
//   x' = a11 x + a12 y + b1,   y' = a21 x + a22 y + b2.
// Eliminating y gives x'' - tau x' + Delta x - rho = 0 with tau = tr a,
// Delta = det a, rho = a12 b2 - a22 b1 and steady state xbar = rho / Delta.

struct RealDistinctRoots {
    double r1 = 0.0;  // (tau - sqrt D) / 2
    double r2 = 0.0;  // (tau + sqrt D) / 2
    double B1 = 0.0;
    double B2 = 0.0;
};

struct ComplexRoots {
    double omega = 0.0;  // sqrt|D| / 2
    double c1 = 0.0;
    double c2 = 0.0;
};

struct DegenerateRoots {};

using RootKind = std::variant<RealDistinctRoots, ComplexRoots, DegenerateRoots>;

struct CharSolution {
    double tau = 0.0;
    double delta = 0.0;
    double rho = 0.0;
    std::optional<double> xbar;
    double D = 0.0;
    RootKind kind;
    double x0 = 0.0;
    double y0 = 0.0;
    double xdot0 = 0.0;
    // System data, kept for the numerical fallback.
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();

    bool real_distinct() const { return std::holds_alternative<RealDistinctRoots>(kind); }
    bool complex() const { return std::holds_alternative<ComplexRoots>(kind); }
    bool degenerate() const { return std::holds_alternative<DegenerateRoots>(kind); }
};

inline const char* kind_name(const CharSolution& s) {
    if (s.real_distinct()) return "RealDistinct";
    if (s.complex()) return "Complex";
    return "Degenerate";
}

inline constexpr double kDegenerateTol = 1e-10;

inline CharSolution solve_expectation(const Eigen::Matrix2d& a, const Eigen::Vector2d& b, double x0,
                                      double y0) {
    if (!a.allFinite() || !b.allFinite() || !std::isfinite(x0) || !std::isfinite(y0)) {
        fail(ErrorKind::Input, "solve_expectation: non-finite input");
    }
    CharSolution s;
    s.a = a;
    s.b = b;
    s.x0 = x0;
    s.y0 = y0;
    s.tau = a(0, 0) + a(1, 1);
    s.delta = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    s.rho = a(0, 1) * b(1) - a(1, 1) * b(0);
    s.D = s.tau * s.tau - 4.0 * s.delta;
    s.xdot0 = a(0, 0) * x0 + a(0, 1) * y0 + b(0);

    const double scale = std::max(1.0, s.tau * s.tau);
    const double delta_scale = std::max(1.0, a.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff());
    if (std::abs(s.delta) < kDegenerateTol * delta_scale || std::abs(s.D) < kDegenerateTol * scale) {
        if (std::abs(s.delta) >= kDegenerateTol * delta_scale) s.xbar = s.rho / s.delta;
        s.kind = DegenerateRoots{};
        return s;
    }
    const double xbar = s.rho / s.delta;
    s.xbar = xbar;
    if (s.D > 0.0) {
        RealDistinctRoots r;
        const double sq = std::sqrt(s.D);
        // Vieta for the smaller-magnitude root avoids cancellation.
        const double big = 0.5 * (s.tau + std::copysign(sq, s.tau));
        const double small = s.delta / big;
        r.r1 = std::min(big, small);
        r.r2 = std::max(big, small);
        r.B2 = (s.xdot0 - r.r1 * (x0 - xbar)) / (r.r2 - r.r1);
        r.B1 = x0 - xbar - r.B2;
        s.kind = r;
    } else {
        ComplexRoots c;
        c.omega = 0.5 * std::sqrt(-s.D);
        c.c1 = x0 - xbar;
        c.c2 = (s.xdot0 - 0.5 * s.tau * (x0 - xbar)) / c.omega;
        s.kind = c;
    }
    return s;
}

/// Convenience overload taking the first two coordinates of a p = 2 model.
inline CharSolution solve_expectation(const SdeModel& model) {
    if (model.p() != 2) fail(ErrorKind::Input, "expectation closed form requires p = 2");
    return solve_expectation(Eigen::Matrix2d(model.a()), Eigen::Vector2d(model.b()), model.x0()(0),
                             model.x0()(1));
}

/// Both coordinates of the expectation by numerical integration.
inline Eigen::Vector2d integrate_expectation(const CharSolution& s, double t, double rtol = 1e-10) {
    LinearOdeIntegrator ode(Matrix(s.a), Vector(s.b), rtol);
    Vector y0(2);
    y0 << s.x0, s.y0;
    return Eigen::Vector2d(ode.solve(y0, t));
}

inline double eval(const CharSolution& s, double t) {
    if (!(t >= 0.0)) fail(ErrorKind::Input, "eval: t must be non-negative");
    if (t == 0.0) return s.x0;
    if (const auto* r = std::get_if<RealDistinctRoots>(&s.kind)) {
        return r->B1 * std::exp(r->r1 * t) + r->B2 * std::exp(r->r2 * t) + *s.xbar;
    }
    if (const auto* c = std::get_if<ComplexRoots>(&s.kind)) {
        const double wt = c->omega * t;
        return std::exp(0.5 * s.tau * t) * (c->c1 * std::cos(wt) + c->c2 * std::sin(wt)) + *s.xbar;
    }
    return integrate_expectation(s, t)(0);
}

/// Exact B_2 of the real-root solution with a_11 = 0:
/// B_2 = (r_1 (xbar - x_0) + a_12 y_0 + b_1) / (r_2 - r_1).
/// r_1 xbar is taken as rho / r_2 so that Delta = 0 (r_1 = 0) stays defined.
/// For large a_22 this behaves like a_12 y_0 / a_22 + a_12 (b_2 + a_21 x_0) / a_22^2.
inline double b2_asymptotic(double a12, double a21, double b1, double b2, double x0, double y0,
                            double a22) {
    const double tau = a22;
    const double delta = -a12 * a21;
    const double D = tau * tau - 4.0 * delta;
    if (!(D > kDegenerateTol * std::max(1.0, tau * tau))) {
        fail(ErrorKind::Regime, "b2_asymptotic: requires D > 0 (two distinct real roots)");
    }
    const double sq = std::sqrt(D);
    const double big = 0.5 * (tau + std::copysign(sq, tau));
    const double small = delta / big;
    const double r1 = std::min(big, small), r2 = std::max(big, small);
    if (r2 == 0.0) fail(ErrorKind::Regime, "b2_asymptotic: r_2 = 0");
    const double rho = a12 * b2 - a22 * b1;
    return (rho / r2 - r1 * x0 + a12 * y0 + b1) / (r2 - r1);
}

}  // namespace sqrtsde
