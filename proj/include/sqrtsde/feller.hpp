#pragma once

#include <optional>
#include <vector>

#include "sqrtsde/conditions.hpp"
#include "sqrtsde/model.hpp"

namespace sqrtsde {

struct FellerReport {
    std::vector<Condition> conditions;
    bool overall = false;
    SdeClass class_context;
    /// Full canonical-form Feller report, attached by the violation profiles.
    std::vector<Condition> canonical_feller;
};

inline FellerReport make_report(std::vector<Condition> conditions, const SdeModel& model) {
    FellerReport r;
    r.overall = all_hold(conditions);
    r.conditions = std::move(conditions);
    r.class_context = classify(model);
    return r;
}

/// Weak Feller conditions for a model already in canonical form C_m(p).
inline FellerReport check_canonical_feller(const SdeModel& model) {
    if (!is_canonical(model)) {
        fail(ErrorKind::Class, "canonical Feller check requires a model in canonical form");
    }
    return make_report(detail::canonical_feller_conditions(model), model);
}

/// Hypotheses used on C(2) models with a_12 > 0: the violation itself, the
/// mean-reversion condition (a_11 < 0, a_22 < 0, det a > 0), the relaxed
/// a_22 < 0 variant and b_1 >= 0.
inline FellerReport check_c2_violation_profile(const SdeModel& model) {
    if (!is_c2(model)) fail(ErrorKind::Class, "C(2) violation profile requires a model in C(2)");
    const Matrix& a = model.a();
    const double det = a.determinant();
    std::vector<Condition> c{
        positive_condition("a_12>0", "a_12 = " + detail::fmt(a(0, 1)) + " > 0", a(0, 1)),
        positive_condition("a_11<0", "a_11 = " + detail::fmt(a(0, 0)) + " < 0", -a(0, 0)),
        positive_condition("a_22<0", "a_22 = " + detail::fmt(a(1, 1)) + " < 0", -a(1, 1)),
        positive_condition("det_a>0", "det a = " + detail::fmt(det) + " > 0", det),
        positive_condition("a_22<0 (relaxed)", "a_22 = " + detail::fmt(a(1, 1)) + " < 0", -a(1, 1)),
        nonneg_condition("b_1≥0", "b_1 = " + detail::fmt(model.b()(0)) + " >= 0", model.b()(0)),
    };
    auto r = make_report(std::move(c), model);
    r.canonical_feller = detail::canonical_feller_conditions(model);
    return r;
}

/// Negativity hypotheses on C_2(2): a_12 < 0 together with a_21 > 0, b_2 > 0.
inline FellerReport check_c22_violation_profile(const SdeModel& model) {
    if (!is_c22(model)) fail(ErrorKind::Class, "C_2(2) violation profile requires a model in C_2(2)");
    const Matrix& a = model.a();
    std::vector<Condition> c{
        positive_condition("a_12<0", "a_12 = " + detail::fmt(a(0, 1)) + " < 0", -a(0, 1)),
        positive_condition("a_21>0", "a_21 = " + detail::fmt(a(1, 0)) + " > 0", a(1, 0)),
        positive_condition("b_2>0", "b_2 = " + detail::fmt(model.b()(1)) + " > 0", model.b()(1)),
    };
    auto r = make_report(std::move(c), model);
    r.canonical_feller = detail::canonical_feller_conditions(model);
    return r;
}

}  // namespace sqrtsde
