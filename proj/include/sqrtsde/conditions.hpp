#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace sqrtsde {

/// One named parameter inequality together with its signed slack.
///
/// `margin` is >= 0 exactly when a non-strict condition holds. Strict
/// conditions additionally fail at margin 0, so callers that want a different
/// boundary policy can read the margin directly.
struct Condition {
    std::string name;
    std::string expression;
    bool holds = false;
    double margin = 0.0;
    bool strict = false;
};

inline Condition nonneg_condition(std::string name, std::string expression, double value) {
    return {std::move(name), std::move(expression), value >= 0.0, value, false};
}

inline Condition positive_condition(std::string name, std::string expression, double value) {
    return {std::move(name), std::move(expression), value > 0.0, value, true};
}

// value == 0; slack is -|value| so that the boundary is the only passing point.
inline Condition zero_condition(std::string name, std::string expression, double value) {
    return {std::move(name), std::move(expression), value == 0.0, -std::abs(value), false};
}

inline bool all_hold(const std::vector<Condition>& conditions) {
    for (const auto& c : conditions) {
        if (!c.holds) return false;
    }
    return true;
}

inline const Condition* find_condition(const std::vector<Condition>& conditions,
                                       const std::string& name) {
    for (const auto& c : conditions) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

}  // namespace sqrtsde
