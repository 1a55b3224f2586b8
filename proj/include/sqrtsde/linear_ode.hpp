#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sqrtsde/model.hpp"

namespace sqrtsde {

/// Adaptive RK4 for the affine system y' = A y + b.
///
/// Step doubling: a full step is compared with two half steps, the local
/// error estimate is |y_half - y_full| / 15, and accepted steps keep the
/// Richardson-extrapolated value. Tolerance is rtol * max(1, |y|_inf).
class LinearOdeIntegrator {
public:
    LinearOdeIntegrator(Matrix A, Vector b, double rtol = 1e-10)
        : A_(std::move(A)), b_(std::move(b)), rtol_(rtol) {
        if (A_.rows() != A_.cols() || A_.rows() != b_.size()) {
            fail(ErrorKind::Input, "LinearOdeIntegrator: dimension mismatch");
        }
    }

    /// Solution at each of the (non-negative) times, in the order given.
    std::vector<Vector> solve(const Vector& y0, const std::vector<double>& times) const {
        std::vector<std::size_t> order(times.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return times[l] < times[r]; });

        std::vector<Vector> out(times.size());
        Vector y = y0;
        double t = 0.0;
        double h = initial_step();
        for (auto k : order) {
            const double target = times[k];
            if (!(target >= 0.0)) fail(ErrorKind::Input, "integration time must be non-negative");
            advance(y, t, target, h);
            out[k] = y;
        }
        return out;
    }

    Vector solve(const Vector& y0, double t) const { return solve(y0, std::vector<double>{t})[0]; }

private:
    double initial_step() const {
        const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
        return 0.01 / scale;
    }

    Vector rhs(const Vector& y) const { return A_ * y + b_; }

    Vector rk4(const Vector& y, double h) const {
        const Vector k1 = rhs(y);
        const Vector k2 = rhs(y + 0.5 * h * k1);
        const Vector k3 = rhs(y + 0.5 * h * k2);
        const Vector k4 = rhs(y + h * k3);
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    void advance(Vector& y, double& t, double target, double& h) const {
        constexpr int kMaxSteps = 50'000'000;
        int steps = 0;
        while (t < target) {
            if (++steps > kMaxSteps) fail(ErrorKind::SafetyCap, "RK4: step limit exceeded");
            const double step = std::min(h, target - t);
            const Vector full = rk4(y, step);
            const Vector half = rk4(rk4(y, 0.5 * step), 0.5 * step);
            const double err = (half - full).cwiseAbs().maxCoeff() / 15.0;
            const double tol = rtol_ * std::max(1.0, half.cwiseAbs().maxCoeff());
            if (!std::isfinite(err)) fail(ErrorKind::Numerical, "RK4: non-finite state");
            if (err <= tol) {
                y = half + (half - full) / 15.0;
                t = (step == target - t) ? target : t + step;
                const double grow = err > 0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
                if (step == h) h *= std::clamp(grow, 0.2, 2.0);
            } else {
                h = step * std::clamp(0.9 * std::pow(tol / err, 0.2), 0.1, 0.5);
                if (h < 1e-14 * std::max(1.0, target)) {
                    fail(ErrorKind::Numerical, "RK4: step size underflow");
                }
            }
        }
    }

    Matrix A_;
    Vector b_;
    double rtol_;
};

}  // namespace sqrtsde
