#pragma once

#include <cmath>
#include <vector>

#include "sqrtsde/model.hpp"

namespace sqrtsde {

/// Affine map X~ = K X + ell taking a proportional-volatility model to C(p).
struct CanonicalTransform {
    Matrix K;
    Vector ell;
    double c = 0.0;
    SdeModel transformed;
    std::vector<int> sign_flips;  // 0-based coordinates negated so that a~_1j >= 0
};

/// Rows spanning the orthogonal complement of a unit vector u.
///
/// Gram-Schmidt over e_1..e_p in index order. A candidate is taken when its
/// residual norm is at least 0.5; if no remaining candidate reaches that, the
/// one with the largest residual is used. Each row is normalized and its first
/// nonzero entry made positive.
inline Matrix complete_orthonormal(const Vector& u) {
    const Eigen::Index p = u.size();
    if (p < 1) fail(ErrorKind::Input, "complete_orthonormal: empty vector");
    if (std::abs(u.norm() - 1.0) > 1e-12) {
        fail(ErrorKind::Input, "complete_orthonormal: input must have unit norm");
    }
    constexpr double kAccept = 0.5;
    constexpr double kZero = 1e-12;

    std::vector<Vector> basis{u};
    Matrix out(p - 1, p);
    std::vector<bool> used(static_cast<std::size_t>(p), false);

    auto residual = [&basis](Eigen::Index j, Eigen::Index n) {
        Vector r = Vector::Unit(n, j);
        for (const auto& q : basis) r -= q.dot(r) * q;
        // second pass for numerical orthogonality
        for (const auto& q : basis) r -= q.dot(r) * q;
        return r;
    };

    for (Eigen::Index row = 0; row < p - 1; ++row) {
        Eigen::Index pick = -1;
        Vector best;
        double best_norm = -1.0;
        Eigen::Index best_j = -1;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            Vector r = residual(j, p);
            const double n = r.norm();
            if (n >= kAccept) {
                pick = j;
                best = std::move(r);
                break;
            }
            if (n > best_norm) {
                best_norm = n;
                best = r;
                best_j = j;
            }
        }
        if (pick < 0) pick = best_j;
        used[static_cast<std::size_t>(pick)] = true;
        if (pick < 0 || best.norm() <= kZero) {
            fail(ErrorKind::InternalConsistency, "complete_orthonormal: basis exhausted");
        }
        Vector r = best / best.norm();
        for (Eigen::Index k = 0; k < p; ++k) {
            if (std::abs(r(k)) > kZero) {
                if (r(k) < 0) r = -r;
                break;
            }
        }
        out.row(row) = r.transpose();
        basis.push_back(r);
    }
    return out;
}

/// Affine change of variables X~ = K X + ell applied to every parameter.
/// The caller supplies the volatility of the result (alpha~, beta~) and the
/// diffusion matrix; drift and initial state follow from K and ell.
inline SdeParams affine_image(const SdeModel& model, const Matrix& K, const Vector& ell) {
    const Matrix Kinv = K.inverse();
    SdeParams out;
    out.a = K * model.a() * Kinv;
    out.b = K * model.b() - out.a * ell;
    out.x0 = K * model.x0() + ell;
    return out;
}

/// Canonical form of a model with proportional volatilities.
///
/// K = sqrt(c) [u; M] Sigma^{-1} with u = beta_1 Sigma / |beta_1 Sigma|,
/// c = 1/|beta_1 Sigma|^2, M completing u to an orthonormal basis, and
/// ell = (c alpha_1, 0, ..., 0). Coordinates j != 1 with a~_1j < 0 are then
/// negated.
inline CanonicalTransform canonicalize(const SdeModel& model) {
    if (!is_proportional(model)) {
        fail(ErrorKind::Class, "canonicalize requires proportional volatilities");
    }
    const int p = model.p();
    const Vector beta1 = model.beta().row(0).transpose();
    if (beta1.cwiseAbs().maxCoeff() == 0.0) {
        fail(ErrorKind::DegenerateVolatility, "canonicalize: beta_1 = 0");
    }
    const Vector w = model.sigma().transpose() * beta1;  // (beta_1 Sigma)^T
    const double wn = w.norm();
    const double c = 1.0 / (wn * wn);
    const Vector u = w / wn;

    Matrix rot(p, p);
    rot.row(0) = u.transpose();
    if (p > 1) rot.bottomRows(p - 1) = complete_orthonormal(u);

    Matrix K = std::sqrt(c) * rot * model.sigma().inverse();
    K.row(0) = c * beta1.transpose();  // exact first row
    Vector ell = Vector::Zero(p);
    ell(0) = c * model.alpha()(0);

    // Sign normalization as a second diagonal transform F: K <- F K, ell <- F ell.
    SdeParams first = affine_image(model, K, ell);
    std::vector<int> flips;
    for (int j = 1; j < p; ++j) {
        if (first.a(0, j) < 0.0) flips.push_back(j);
    }
    if (!flips.empty()) {
        Vector f = Vector::Ones(p);
        for (int j : flips) f(j) = -1.0;
        K = f.asDiagonal() * K;
        ell = f.asDiagonal() * ell;
    }

    SdeParams params = affine_image(model, K, ell);
    params.sigma = Matrix::Identity(p, p);
    params.alpha = Vector::Zero(p);
    params.beta = Matrix::Zero(p, p);
    params.beta.col(0).setOnes();
    // The first coordinate is c V_1 >= 0 by construction; clear round-off.
    params.x0(0) = c * (model.alpha()(0) + beta1.dot(model.x0()));
    if (params.x0(0) < 0.0 && params.x0(0) > -kInitialVolTol) params.x0(0) = 0.0;

    return CanonicalTransform{std::move(K), std::move(ell), c, SdeModel(std::move(params)),
                              std::move(flips)};
}

/// Removes b_1 from a C(2) model through Y = X_2 + b_1 / a_12.
///
/// With X_2 = Y - b_1/a_12 the first drift becomes a_11 V + a_12 Y and the
/// second intercept becomes b_2 - a_22 b_1 / a_12.
inline SdeModel eliminate_b1(const SdeModel& model) {
    if (!is_c2(model)) fail(ErrorKind::Class, "eliminate_b1 requires a model in C(2)");
    const double a12 = model.a()(0, 1);
    if (a12 == 0.0) {
        fail(ErrorKind::Hypothesis,
             "eliminate_b1: a_12 = 0, the substitution is undefined (use the one-dimensional analysis)");
    }
    const double b1 = model.b()(0);
    if (b1 == 0.0) return model;
    const double shift = b1 / a12;
    SdeParams p = model.params();
    p.x0(1) += shift;
    p.b(1) -= model.a()(1, 1) * shift;
    p.b(0) = 0.0;
    return SdeModel(std::move(p));
}

}  // namespace sqrtsde
