#pragma once

#include <cmath>
#include <cstdint>

#include <boost/math/distributions/beta.hpp>

namespace sqrtsde {

/// Running mean and second central moment; mergeable (Chan et al.).
struct Moments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double total = na + nb;
        const double d = o.mean - mean;
        mean += d * (nb / total);
        m2 += o.m2 + d * d * (na * nb / total);
        n += o.n;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    /// Sample standard deviation over sqrt(n).
    double standard_error() const { return n > 0 ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

/// One-sided Clopper-Pearson lower confidence bound for a binomial proportion.
inline double binomial_lower_bound(std::uint64_t successes, std::uint64_t trials, double confidence) {
    if (successes == 0 || trials == 0) return 0.0;
    const double alpha = 1.0 - confidence;
    boost::math::beta_distribution<double> dist(static_cast<double>(successes),
                                                static_cast<double>(trials - successes + 1));
    return boost::math::quantile(dist, alpha);
}

}  // namespace sqrtsde
