#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "sqrtsde/feller.hpp"
#include "sqrtsde/model.hpp"
#include "sqrtsde/odeexp.hpp"

namespace sqrtsde {

enum class CertRoute {
    IndependentVols,   // C_2(2): tilt a_11 and a_22
    ProportionalVols   // C(2):   tilt a_11 and a_21
};

inline const char* to_string(CertRoute r) {
    return r == CertRoute::IndependentVols ? "IndependentVols" : "ProportionalVols";
}

/// One drift entry changed by the measure change (0-based row/col).
struct TiltedEntry {
    int row = 0;
    int col = 0;
    double original = 0.0;
    double tilted = 0.0;

    std::string name() const { return "a_" + std::to_string(row + 1) + std::to_string(col + 1); }
};

/// A tilt under which the expected first coordinate is negative at t0.
struct Certificate {
    CertRoute route = CertRoute::IndependentVols;
    int proof_case = 0;  // 1..3 for ProportionalVols, 0 otherwise
    double t0 = 0.0;
    std::array<TiltedEntry, 2> tilted_params{};
    Eigen::Vector2d lambda = Eigen::Vector2d::Zero();
    double expected_value = 0.0;
    double oracle_value = 0.0;
    // Search bookkeeping.
    int doublings = 0;               // IndependentVols
    std::optional<long> k;           // ProportionalVols
    std::optional<double> omega;     // ProportionalVols
    std::optional<double> case1_bound;
};

inline constexpr double kOracleRelTol = 1e-7;
inline constexpr int kMaxDoublings = 60;
inline constexpr long kMaxK = 1'000'000;

namespace detail {

inline void verify_certificate(Certificate& cert, const CharSolution& sol) {
    cert.expected_value = eval(sol, cert.t0);
    cert.oracle_value = integrate_expectation(sol, cert.t0, 1e-12)(0);
    const double tol = kOracleRelTol * std::max(1.0, std::abs(cert.expected_value));
    if (!(cert.expected_value < 0.0) || !(cert.oracle_value < 0.0) ||
        !(std::abs(cert.expected_value - cert.oracle_value) < tol)) {
        fail(ErrorKind::InternalConsistency,
             "certificate verification failed: closed form " + fmt(cert.expected_value) +
                 ", RK4 oracle " + fmt(cert.oracle_value));
    }
}

inline Eigen::Matrix2d mat2(const SdeModel& m) { return Eigen::Matrix2d(m.a()); }
inline Eigen::Vector2d vec2(const SdeModel& m) { return Eigen::Vector2d(m.b()); }

}  // namespace detail

/// Negativity certificate on C_2(2) under a_12 < 0, a_21 > 0, b_2 > 0.
///
/// Sets a_11 = 0 and doubles a_22 from max(1, |a_22|, 2|a_12|(|y0| + |b2| + |a_21 x0|))
/// until the characteristic roots are real and distinct and x(t0) < 0.
inline Certificate certify_c22(const SdeModel& model, double t0) {
    if (!(t0 > 0.0) || !std::isfinite(t0)) fail(ErrorKind::Input, "certify: t0 must be positive");
    if (!is_c22(model)) fail(ErrorKind::Hypothesis, "certify_c22 requires a model in C_2(2)");
    const FellerReport profile = check_c22_violation_profile(model);
    if (!profile.overall) {
        std::string failed;
        for (const auto& c : profile.conditions) {
            if (!c.holds) failed += (failed.empty() ? "" : ", ") + c.name;
        }
        fail(ErrorKind::Hypothesis, "certify_c22: hypotheses fail: " + failed);
    }
    const double x0 = model.x0()(0);
    const double y0 = model.x0()(1);
    if (x0 < -kInitialVolTol || y0 < -kInitialVolTol) {
        fail(ErrorKind::Hypothesis, "certify_c22: requires x0 >= 0 and y0 >= 0");
    }
    const Eigen::Matrix2d a = detail::mat2(model);
    const Eigen::Vector2d b = detail::vec2(model);
    const double a12 = a(0, 1), a21 = a(1, 0), a22 = a(1, 1);

    double a22_tilt = std::max({1.0, std::abs(a22),
                                2.0 * std::abs(a12) * (std::abs(y0) + std::abs(b(1)) + std::abs(a21 * x0))});
    for (int d = 0; d <= kMaxDoublings; ++d, a22_tilt *= 2.0) {
        Eigen::Matrix2d at = a;
        at(0, 0) = 0.0;
        at(1, 1) = a22_tilt;
        const CharSolution sol = solve_expectation(at, b, x0, y0);
        if (!sol.real_distinct()) continue;
        const double value = eval(sol, t0);
        if (!std::isfinite(value)) break;
        if (value >= 0.0) continue;

        Certificate cert;
        cert.route = CertRoute::IndependentVols;
        cert.t0 = t0;
        cert.doublings = d;
        cert.tilted_params = {TiltedEntry{0, 0, a(0, 0), 0.0}, TiltedEntry{1, 1, a22, a22_tilt}};
        cert.lambda = Eigen::Vector2d(-a(0, 0), a22_tilt - a22);
        detail::verify_certificate(cert, sol);
        return cert;
    }
    fail(ErrorKind::SearchFailure, "certify_c22: no a_22 found within the doubling cap");
}

/// Negativity certificate on C(2) with a_12 > 0 and b_1 = 0.
///
/// The free entries are a_11 and a_21. The frequency omega is fixed by the
/// case of the initial data and a_21 follows from Delta = (tau^2 + 4 omega^2)/4:
///   case 1, x0 > 0:                omega = (pi + 2 pi k)/t0 with xbar below the case-1 bound
///   case 2, x0 = 0, rho != 0:      sgn(tau) = sgn(rho), omega = 2 pi k / t0
///   case 3, x0 = rho = 0, x'0 != 0: omega = (pi/2 + pi k)/t0, k even iff x'0 < 0
inline Certificate certify_c2(const SdeModel& model, double t0) {
    if (!(t0 > 0.0) || !std::isfinite(t0)) fail(ErrorKind::Input, "certify: t0 must be positive");
    if (!is_c2(model)) fail(ErrorKind::Hypothesis, "certify_c2 requires a model in C(2)");
    const Eigen::Matrix2d a = detail::mat2(model);
    const Eigen::Vector2d b = detail::vec2(model);
    const double a11 = a(0, 0), a12 = a(0, 1), a21 = a(1, 0), a22 = a(1, 1);
    if (!(a12 > 0.0)) fail(ErrorKind::Hypothesis, "certify_c2: requires a_12 > 0 (canonicalize first)");
    if (b(0) != 0.0) fail(ErrorKind::Hypothesis, "certify_c2: requires b_1 = 0 (apply eliminate_b1 first)");

    const double x0 = model.x0()(0) > 0.0 ? model.x0()(0) : 0.0;
    const double y0 = model.x0()(1);
    const double b2 = b(1);
    const double rho = a12 * b2;
    const double xdot0 = a11 * x0 + a12 * y0;
    const double ydot0 = a21 * x0 + a22 * y0 + b2;
    if (x0 == 0.0 && xdot0 == 0.0 && ydot0 == 0.0) {
        fail(ErrorKind::ExcludedCase, "certify_c2: (x0, x'0, y'0) = (0, 0, 0) is excluded");
    }

    constexpr double pi = std::numbers::pi;
    int proof_case = 0;
    double a11_tilt = a11;
    long k_start = 0;
    auto omega_of = [&](long k) -> double {
        switch (proof_case) {
            case 1: return (pi + 2.0 * pi * static_cast<double>(k)) / t0;
            case 2: return 2.0 * pi * static_cast<double>(k) / t0;
            default: return (0.5 * pi + pi * static_cast<double>(k)) / t0;
        }
    };
    long k_step = 1;
    if (x0 > 0.0) {
        proof_case = 1;
    } else if (rho != 0.0) {
        proof_case = 2;
        const double tau = a11 + a22;
        if (!(tau != 0.0 && std::signbit(tau) == std::signbit(rho))) {
            a11_tilt = std::copysign(1.0, rho) - a22;
        }
        k_start = 1;
    } else {
        proof_case = 3;
        k_start = xdot0 < 0.0 ? 0 : 1;
        k_step = 2;
    }
    const double tau = a11_tilt + a22;

    for (long k = k_start; k <= kMaxK; k += k_step) {
        const double omega = omega_of(k);
        const double delta = 0.25 * (tau * tau + 4.0 * omega * omega);
        const double xbar = rho / delta;
        std::optional<double> bound;
        if (proof_case == 1) {
            bound = x0 / (1.0 + std::exp(-0.5 * tau * t0));
            if (!(xbar < *bound)) continue;
        }
        const double a21_tilt = (a11_tilt * a22 - delta) / a12;
        Eigen::Matrix2d at = a;
        at(0, 0) = a11_tilt;
        at(1, 0) = a21_tilt;
        const CharSolution sol = solve_expectation(at, b, x0, y0);
        if (!sol.complex()) continue;
        if (!(eval(sol, t0) < 0.0)) continue;

        Certificate cert;
        cert.route = CertRoute::ProportionalVols;
        cert.proof_case = proof_case;
        cert.t0 = t0;
        cert.k = k;
        cert.omega = omega;
        cert.case1_bound = bound;
        cert.tilted_params = {TiltedEntry{0, 0, a11, a11_tilt}, TiltedEntry{1, 0, a21, a21_tilt}};
        cert.lambda = Eigen::Vector2d(a11_tilt - a11, a21_tilt - a21);
        detail::verify_certificate(cert, sol);
        return cert;
    }
    fail(ErrorKind::SearchFailure, "certify_c2: no admissible k up to the cap");
}

/// Drift after the measure change with parameter lambda:
/// a + Sigma diag(lambda) beta and b + Sigma diag(lambda) alpha.
inline SdeModel tilt_model(const SdeModel& model, const Vector& lambda) {
    if (lambda.size() != model.p()) fail(ErrorKind::Input, "tilt: lambda has the wrong length");
    SdeParams p = model.params();
    p.a += model.sigma() * lambda.asDiagonal() * model.beta();
    p.b += model.sigma() * lambda.asDiagonal() * model.alpha();
    return SdeModel(std::move(p));
}

/// Model with the certificate's drift entries in place of the original ones.
inline SdeModel to_tilted_model(const SdeModel& model, const Certificate& cert) {
    const bool ok = cert.route == CertRoute::IndependentVols ? is_c22(model) : is_c2(model);
    if (!ok) fail(ErrorKind::Input, "to_tilted_model: certificate route does not match the model class");
    SdeParams p = model.params();
    for (const auto& e : cert.tilted_params) {
        if (p.a(e.row, e.col) != e.original) {
            fail(ErrorKind::Input, "to_tilted_model: certificate was issued for a different model");
        }
        p.a(e.row, e.col) = e.tilted;
    }
    return SdeModel(std::move(p));
}

}  // namespace sqrtsde
