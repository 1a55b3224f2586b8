#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqrtsde/model.hpp"

namespace sqrtsde {

// ---------------------------------------------------------------------------
// Local Novikov schedule on C(2) with a_12 > 0, a_22 < 0, det a > 0.

struct NovikovConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double c = 0.0;  // exponent scale
    // k(t) = c1 v0 + c2 y0 + c2 b2 t 1{b2 > 0}
    double k_intercept = 0.0;
    double k_slope = 0.0;

    double k(double t) const { return k_intercept + k_slope * t; }
};

namespace detail {

inline void require_c2_drift(const SdeModel& model, const char* who) {
    if (model.p() != 2) fail(ErrorKind::Hypothesis, std::string(who) + ": requires p = 2");
    const Matrix& a = model.a();
    if (!(a(0, 1) > 0.0)) fail(ErrorKind::Hypothesis, std::string(who) + ": requires a_12 > 0");
    if (!(a(1, 1) < 0.0)) fail(ErrorKind::Hypothesis, std::string(who) + ": requires a_22 < 0");
    if (!(a.determinant() > 0.0)) fail(ErrorKind::Hypothesis, std::string(who) + ": requires det a > 0");
}

}  // namespace detail

/// c1 = -2 a22 det a / (a12^2 + a22^2), c2 = 2 a12 det a / (a12^2 + a22^2).
/// They satisfy c1 a12 + c2 a22 = 0 and c1 a11 + c2 a21 = -(c1^2 + c2^2)/2,
/// which is checked here.
inline NovikovConstants constants(const SdeModel& model, double c) {
    detail::require_c2_drift(model, "novikov constants");
    if (!(c > 0.0)) fail(ErrorKind::Input, "novikov constants: c must be positive");
    const Matrix& a = model.a();
    const double det = a.determinant();
    const double n = a(0, 1) * a(0, 1) + a(1, 1) * a(1, 1);
    NovikovConstants k;
    k.c = c;
    k.c1 = -2.0 * a(1, 1) * det / n;
    k.c2 = 2.0 * a(0, 1) * det / n;
    const double b2 = model.b()(1);
    k.k_intercept = k.c1 * model.x0()(0) + k.c2 * model.x0()(1);
    k.k_slope = b2 > 0.0 ? k.c2 * b2 : 0.0;

    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * std::max(k.c1, k.c2));
    const double id1 = k.c1 * a(0, 1) + k.c2 * a(1, 1);
    const double id2 = k.c1 * a(0, 0) + k.c2 * a(1, 0) + 0.5 * (k.c1 * k.c1 + k.c2 * k.c2);
    if (std::abs(id1) > 1e-10 * scale || std::abs(id2) > 1e-10 * scale) {
        fail(ErrorKind::InternalConsistency, "novikov constants: identities do not hold");
    }
    return k;
}

/// eps(t) = min(-a11/c, (-t + sqrt(t^2 + 2 c2/(c a12)))/2), the second term
/// being the positive root of e^2 + t e - c2/(2 c a12) = 0.
inline double epsilon(const SdeModel& model, double c, double t) {
    detail::require_c2_drift(model, "epsilon");
    if (!(model.a()(0, 0) < 0.0)) fail(ErrorKind::Hypothesis, "epsilon: requires a_11 < 0");
    if (!(t >= 0.0)) fail(ErrorKind::Input, "epsilon: t must be non-negative");
    const NovikovConstants k = constants(model, c);
    const double q = 2.0 * k.c2 / (c * model.a()(0, 1));
    // (-t + sqrt(t^2 + q)) / 2 written without cancellation.
    const double root = 0.5 * q / (t + std::sqrt(t * t + q));
    return std::min(-model.a()(0, 0) / c, root);
}

struct Partition {
    std::vector<double> times;
    double horizon = 0.0;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

inline constexpr std::size_t kPartitionCap = 10'000'000;

/// t_0 = 0, t_{i+1} = t_i + eps(t_i) until the grid reaches the horizon.
inline Partition partition(const SdeModel& model, double c, double horizon) {
    if (!(horizon > 0.0)) fail(ErrorKind::Input, "partition: horizon must be positive");
    // Validates hypotheses once; the loop below reuses the constants.
    (void)epsilon(model, c, 0.0);
    const NovikovConstants k = constants(model, c);
    const double q = 2.0 * k.c2 / (c * model.a()(0, 1));
    const double cap = -model.a()(0, 0) / c;

    Partition out;
    out.horizon = horizon;
    out.times.push_back(0.0);
    double t = 0.0;
    while (t < horizon) {
        if (out.times.size() > kPartitionCap) {
            fail(ErrorKind::SafetyCap, "partition: step count exceeded the safety cap");
        }
        const double eps = std::min(cap, 0.5 * q / (t + std::sqrt(t * t + q)));
        if (!(eps > 0.0)) fail(ErrorKind::InternalConsistency, "partition: non-positive step");
        t = t + eps;
        out.times.push_back(t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Additional requirement for A_m(p): exists c_i > 0 (i <= m) with
// sum_j c_j a_ji <= -m c_i^2 / 2 for all i <= m.

struct AddreqResult {
    bool holds = false;
    std::optional<Vector> witness;
};

/// max_i (sum_j c_j a_ji + m c_i^2 / 2); <= 0 means c satisfies the requirement.
inline double addreq_violation(const Matrix& a, const Vector& c) {
    const Eigen::Index m = a.rows();
    const Vector col_sums = a.transpose() * c;
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
        worst = std::max(worst, col_sums(i) + 0.5 * static_cast<double>(m) * c(i) * c(i));
    }
    return worst;
}

/// Independent re-check of a witness, tolerant of round-off at equality.
inline bool verify_addreq_witness(const Matrix& a, const Vector& c, double tol = 1e-12) {
    if (c.size() != a.rows() || (c.array() <= 0.0).any()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * c.cwiseAbs().maxCoeff());
    return addreq_violation(a, c) <= tol * scale;
}

namespace detail {

// If a^T c < 0 componentwise, shrink c along its ray until the quadratic term
// fits: s c works for s <= min_i -2 (a^T c)_i / (m c_i^2).
inline std::optional<Vector> scale_to_witness(const Matrix& a, const Vector& c) {
    const Eigen::Index m = a.rows();
    const Vector r = a.transpose() * c;
    double s = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(r(i) < 0.0)) return std::nullopt;
        s = std::min(s, -2.0 * r(i) / (static_cast<double>(m) * c(i) * c(i)));
    }
    Vector w = std::min(1.0, 0.5 * s) * c;
    if (verify_addreq_witness(a, w, 0.0)) return w;
    return std::nullopt;
}

// Direction score: max_i (a^T c)_i / |c|; negative iff a feasible ray exists there.
inline double direction_score(const Matrix& a, const Vector& c) {
    return (a.transpose() * c).maxCoeff() / c.norm();
}

}  // namespace detail

/// Heuristic feasibility search for the additional requirement.
///
/// Tries c = (1,...,1), then a log-uniform grid on [1e-3, 1e3]^m, then a
/// compass search in log-coordinates on the worst constraint. A returned
/// witness always satisfies the inequalities; `holds == false` only means
/// no witness was found.
inline AddreqResult check_addreq(const Matrix& a, int m) {
    if (m < 1 || a.rows() < m || a.cols() < m) fail(ErrorKind::Input, "check_addreq: bad block size");
    const Matrix block = a.topLeftCorner(m, m);
    if (!block.allFinite()) fail(ErrorKind::Input, "check_addreq: non-finite matrix");

    const Vector ones = Vector::Ones(m);
    if (verify_addreq_witness(block, ones)) return {true, ones};
    if (auto w = detail::scale_to_witness(block, ones)) return {true, *w};

    // Grid: points per axis shrink with m to keep the sweep bounded.
    int per_axis = 61;
    while (per_axis > 3 && std::pow(per_axis, m) > 2e5) per_axis -= 2;
    const double lo = std::log(1e-3), hi = std::log(1e3);
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    Vector best_log = Vector::Zero(m);
    double best_score = std::numeric_limits<double>::infinity();
    Vector logc(m);
    for (;;) {
        for (int i = 0; i < m; ++i) {
            logc(i) = lo + (hi - lo) * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
        }
        const Vector c = logc.array().exp();
        if (auto w = detail::scale_to_witness(block, c)) return {true, *w};
        const double score = detail::direction_score(block, c);
        if (score < best_score) {
            best_score = score;
            best_log = logc;
        }
        int d = 0;
        while (d < m && ++idx[static_cast<std::size_t>(d)] == per_axis) idx[static_cast<std::size_t>(d++)] = 0;
        if (d == m) break;
    }

    // Compass search on the direction score.
    double step = (hi - lo) / (per_axis - 1);
    Vector x = best_log;
    double fx = best_score;
    for (int iter = 0; iter < 20000 && step > 1e-13; ++iter) {
        bool improved = false;
        for (int i = 0; i < m && !improved; ++i) {
            for (double sgn : {1.0, -1.0}) {
                Vector y = x;
                y(i) += sgn * step;
                const Vector c = y.array().exp();
                if (auto w = detail::scale_to_witness(block, c)) return {true, *w};
                const double fy = detail::direction_score(block, c);
                if (fy < fx) {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return {false, std::nullopt};
}

/// Sign-pattern cases (i)-(iv) for a 2x2 drift under which the requirement holds.
inline std::set<std::string> classify_2x2_cases(const Matrix& a) {
    if (a.rows() != 2 || a.cols() != 2) fail(ErrorKind::Input, "classify_2x2_cases: needs a 2x2 matrix");
    const double a11 = a(0, 0), a12 = a(0, 1), a21 = a(1, 0), a22 = a(1, 1);
    const double det = a11 * a22 - a12 * a21;
    std::set<std::string> out;
    if (a12 >= 0 && a21 >= 0 && a11 < 0 && a22 < 0 && det > 0) out.insert("i");
    if (a12 < 0 && a21 < 0 && a11 >= 0 && a22 >= 0 && det < 0) out.insert("ii");
    if (a11 < 0 && a12 < 0) out.insert("iii");
    if (a22 < 0 && a21 < 0) out.insert("iv");
    return out;
}

/// Diagonal shift mu with c = (1,...,1) taken at equality:
/// mu_i = -m/2 - a_ii - sum_{j != i, j <= m} a_ji for i <= m, mu_i = 0 otherwise.
inline Vector find_diag_shift(const SdeModel& model) {
    const int p = model.p();
    const int m = model.m();
    const Matrix& a = model.a();
    Vector mu = Vector::Zero(p);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j != i) s += a(j, i);
        }
        mu(i) = -0.5 * m - a(i, i) - s;
    }
    return mu;
}

}  // namespace sqrtsde
