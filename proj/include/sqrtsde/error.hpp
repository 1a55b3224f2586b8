#pragma once

#include <stdexcept>
#include <string>

namespace sqrtsde {

enum class ErrorKind {
    Input,                 // malformed or inconsistent input
    Class,                 // model is not in the class an operation requires
    DegenerateVolatility,  // beta_1 = 0 where a volatility direction is needed
    Hypothesis,            // parameter hypotheses of an analytic result fail
    Regime,                // closed form requested outside its regime
    ExcludedCase,          // initial data in the excluded (0,0,0) case
    SearchFailure,         // bounded parameter search hit its cap
    InternalConsistency,   // a self-check of a computed result failed
    SafetyCap,             // iteration cap that should be unreachable
    Numerical              // overflow / non-finite values
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input: return "input";
        case ErrorKind::Class: return "class";
        case ErrorKind::DegenerateVolatility: return "degenerate-volatility";
        case ErrorKind::Hypothesis: return "hypothesis";
        case ErrorKind::Regime: return "regime";
        case ErrorKind::ExcludedCase: return "excluded-case";
        case ErrorKind::SearchFailure: return "search-failure";
        case ErrorKind::InternalConsistency: return "internal-consistency";
        case ErrorKind::SafetyCap: return "safety-cap";
        case ErrorKind::Numerical: return "numerical";
    }
    return "unknown";
}

/// Process exit code for an error kind: 1 negative outcome, 2 invalid input,
/// 3 hypothesis failure, 4 internal numerical failure.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input:
        case ErrorKind::Class:
        case ErrorKind::DegenerateVolatility:
            return 2;
        case ErrorKind::Hypothesis:
        case ErrorKind::Regime:
        case ErrorKind::ExcludedCase:
            return 3;
        case ErrorKind::SearchFailure:
            return 1;
        case ErrorKind::InternalConsistency:
        case ErrorKind::SafetyCap:
        case ErrorKind::Numerical:
            return 4;
    }
    return 4;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace sqrtsde
