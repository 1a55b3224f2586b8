#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sqrtsde/conditions.hpp"
#include "sqrtsde/error.hpp"

namespace sqrtsde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kIdentityTol = 1e-12;
inline constexpr double kRankRelTol = 1e-10;
inline constexpr double kSigmaDetTol = 1e-12;
inline constexpr double kInitialVolTol = 1e-12;

/// Raw parameters of dX = (aX + b)dt + Sigma sqrt|v(X)| dW, v_i(x) = alpha_i + beta_i x.
/// Plain data; validation happens when an SdeModel is built from it.
struct SdeParams {
    Matrix a;
    Vector b;
    Matrix sigma;
    Vector alpha;
    Matrix beta;
    Vector x0;
};

/// Number of singular values above `rel_tol` times the largest one.
inline int numerical_rank(const Matrix& m, double rel_tol = kRankRelTol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s(0) <= 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > rel_tol * s(0)) ++rank;
    }
    return rank;
}

/// A validated square-root SDE. Immutable once constructed.
class SdeModel {
public:
    explicit SdeModel(SdeParams params) : params_(std::move(params)) {
        validate();
        m_ = numerical_rank(params_.beta);
    }

    int p() const { return static_cast<int>(params_.x0.size()); }
    int m() const { return m_; }

    const Matrix& a() const { return params_.a; }
    const Vector& b() const { return params_.b; }
    const Matrix& sigma() const { return params_.sigma; }
    const Vector& alpha() const { return params_.alpha; }
    const Matrix& beta() const { return params_.beta; }
    const Vector& x0() const { return params_.x0; }
    const SdeParams& params() const { return params_; }

private:
    void validate() const {
        const auto p = params_.x0.size();
        if (p < 1) fail(ErrorKind::Input, "model dimension p must be >= 1");
        auto square = [p](const Matrix& m, const char* name) {
            if (m.rows() != p || m.cols() != p) {
                fail(ErrorKind::Input, std::string(name) + " must be " + std::to_string(p) + "x" +
                                           std::to_string(p));
            }
        };
        auto vec = [p](const Vector& v, const char* name) {
            if (v.size() != p) {
                fail(ErrorKind::Input, std::string(name) + " must have length " + std::to_string(p));
            }
        };
        square(params_.a, "a");
        square(params_.sigma, "sigma");
        square(params_.beta, "beta");
        vec(params_.b, "b");
        vec(params_.alpha, "alpha");

        auto finite = [](const auto& m) { return m.allFinite(); };
        if (!finite(params_.a) || !finite(params_.b) || !finite(params_.sigma) ||
            !finite(params_.alpha) || !finite(params_.beta) || !finite(params_.x0)) {
            fail(ErrorKind::Input, "model parameters must be finite");
        }
        if (std::abs(params_.sigma.determinant()) <= kSigmaDetTol) {
            fail(ErrorKind::Input, "sigma must be non-singular");
        }
        const Vector v0 = params_.alpha + params_.beta * params_.x0;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (v0(i) < -kInitialVolTol) {
                fail(ErrorKind::Input, "initial volatility v_" + std::to_string(i + 1) +
                                           "(x0) = " + std::to_string(v0(i)) + " is negative");
            }
        }
    }

    SdeParams params_;
    int m_ = 0;
};

/// Volatility factors alpha_i + beta_i x (signed, no absolute value).
inline Vector eval_volatility(const SdeModel& model, const Vector& x) {
    if (x.size() != model.p()) {
        fail(ErrorKind::Input, "state has length " + std::to_string(x.size()) + ", model has p = " +
                                   std::to_string(model.p()));
    }
    return model.alpha() + model.beta() * x;
}

// ---------------------------------------------------------------------------
// Classification

enum class SdeClassTag {
    General,               // S_m(p)
    Canonical,             // C_m(p)
    CanonicalFeller,       // A_m(p)
    Proportional,          // S(p)
    ProportionalCanonical  // C(p)
};

inline const char* to_string(SdeClassTag tag) {
    switch (tag) {
        case SdeClassTag::General: return "General";
        case SdeClassTag::Canonical: return "Canonical";
        case SdeClassTag::CanonicalFeller: return "CanonicalFeller";
        case SdeClassTag::Proportional: return "Proportional";
        case SdeClassTag::ProportionalCanonical: return "ProportionalCanonical";
    }
    return "General";
}

struct SdeClass {
    SdeClassTag tag = SdeClassTag::General;
    int p = 0;
    int m = 0;
    bool canonical = false;
    bool canonical_feller = false;
    bool proportional = false;
    /// Canonical-form Feller conditions; empty unless canonical.
    std::vector<Condition> satisfied_conditions;
    /// Indices i (0-based) with v_i(x0) within tolerance of zero.
    std::vector<int> zero_initial_volatility;

    bool proportional_canonical() const { return canonical && proportional; }

    /// Membership test; a model can belong to several nested classes at once.
    bool is(SdeClassTag t) const {
        switch (t) {
            case SdeClassTag::General: return true;
            case SdeClassTag::Canonical: return canonical;
            case SdeClassTag::CanonicalFeller: return canonical_feller;
            case SdeClassTag::Proportional: return proportional;
            case SdeClassTag::ProportionalCanonical: return proportional_canonical();
        }
        return false;
    }
};

inline bool is_identity(const Matrix& m, double tol = kIdentityTol) {
    return m.rows() == m.cols() &&
           (m - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// All volatility factors share (alpha_1, beta_1).
inline bool is_proportional(const SdeModel& model) {
    for (int i = 1; i < model.p(); ++i) {
        if (model.alpha()(i) != model.alpha()(0)) return false;
        if (model.beta().row(i) != model.beta().row(0)) return false;
    }
    return true;
}

/// Sigma = I and v_i(x) = x_i for i <= m (alpha_i = 0, beta_i = e_i exactly).
inline bool is_canonical(const SdeModel& model) {
    if (!is_identity(model.sigma())) return false;
    for (int i = 0; i < model.m(); ++i) {
        if (model.alpha()(i) != 0.0) return false;
        for (int j = 0; j < model.p(); ++j) {
            if (model.beta()(i, j) != (i == j ? 1.0 : 0.0)) return false;
        }
    }
    return true;
}

namespace detail {

inline std::string idx(int i) { return std::to_string(i + 1); }

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Feller conditions in canonical form: for i, j <= m and k > m,
// a_ij >= 0 (i != j), a_ik = 0, b_i >= 0, alpha_k >= 0, beta_ki >= 0.
inline std::vector<Condition> canonical_feller_conditions(const SdeModel& model) {
    std::vector<Condition> out;
    const int p = model.p();
    const int m = model.m();
    const Matrix& a = model.a();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            out.push_back(nonneg_condition("a_" + idx(i) + idx(j) + "≥0",
                                           "a_" + idx(i) + idx(j) + " = " + fmt(a(i, j)) + " >= 0",
                                           a(i, j)));
        }
    }
    for (int i = 0; i < m; ++i) {
        for (int k = m; k < p; ++k) {
            out.push_back(zero_condition("a_" + idx(i) + idx(k) + "=0",
                                         "a_" + idx(i) + idx(k) + " = " + fmt(a(i, k)) + " == 0",
                                         a(i, k)));
        }
    }
    for (int i = 0; i < m; ++i) {
        out.push_back(nonneg_condition("b_" + idx(i) + "≥0",
                                       "b_" + idx(i) + " = " + fmt(model.b()(i)) + " >= 0",
                                       model.b()(i)));
    }
    for (int k = m; k < p; ++k) {
        out.push_back(nonneg_condition("alpha_" + idx(k) + "≥0",
                                       "alpha_" + idx(k) + " = " + fmt(model.alpha()(k)) + " >= 0",
                                       model.alpha()(k)));
        for (int i = 0; i < m; ++i) {
            const double v = model.beta()(k, i);
            out.push_back(nonneg_condition("beta_" + idx(k) + idx(i) + "≥0",
                                           "beta_" + idx(k) + idx(i) + " = " + fmt(v) + " >= 0", v));
        }
    }
    return out;
}

}  // namespace detail

inline SdeClass classify(const SdeModel& model) {
    SdeClass cls;
    cls.p = model.p();
    cls.m = model.m();
    cls.canonical = is_canonical(model);
    cls.proportional = is_proportional(model);
    if (cls.canonical) {
        cls.satisfied_conditions = detail::canonical_feller_conditions(model);
        cls.canonical_feller = all_hold(cls.satisfied_conditions);
    }
    const Vector v0 = eval_volatility(model, model.x0());
    for (Eigen::Index i = 0; i < v0.size(); ++i) {
        if (std::abs(v0(i)) <= kInitialVolTol) cls.zero_initial_volatility.push_back(static_cast<int>(i));
    }

    if (cls.canonical && cls.proportional) {
        cls.tag = SdeClassTag::ProportionalCanonical;
    } else if (cls.canonical_feller) {
        cls.tag = SdeClassTag::CanonicalFeller;
    } else if (cls.canonical) {
        cls.tag = SdeClassTag::Canonical;
    } else if (cls.proportional) {
        cls.tag = SdeClassTag::Proportional;
    }
    return cls;
}

/// C_2(2): canonical with two independent volatility factors.
inline bool is_c22(const SdeModel& model) {
    return model.p() == 2 && model.m() == 2 && is_canonical(model);
}

/// C(2): canonical with proportional volatilities, v_1 = v_2 = x_1.
inline bool is_c2(const SdeModel& model) {
    return model.p() == 2 && model.m() == 1 && is_canonical(model) && is_proportional(model);
}

}  // namespace sqrtsde
