#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

#include "singflow/error.hpp"

namespace singflow {

// Embedded adaptive Runge-Kutta (Dormand-Prince 5(4)). State dimension is
// fixed at compile time; the step controller is PI-free (plain error-power
// scaling) which is plenty for the smooth right-hand sides used here.
template <int N>
class AdaptiveRK {
public:
    using State = Eigen::Matrix<double, N, 1>;
    using Rhs = std::function<State(double, const State&)>;

    struct Options {
        double rel_tol = 1e-9;
        double abs_tol = 1e-12;
        double initial_step = 1e-6;
        double max_step = std::numeric_limits<double>::infinity();
        long max_steps = 50'000'000;
    };

    // Advances (t, y) by one accepted step, updating the suggested step size.
    // Returns false when the controller cannot make progress.
    static bool step(const Rhs& f, double& t, State& y, double& h, const Options& opt) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        for (int attempt = 0; attempt < 60; ++attempt) {
            const State k1 = f(t, y);
            const State k2 = f(t + c2 * h, y + h * (0.2 * k1));
            const State k3 = f(t + c3 * h, y + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
            const State k4 = f(t + c4 * h, y + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3));
            const State k5 = f(t + c5 * h,
                               y + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 +
                                        64448.0 / 6561 * k3 - 212.0 / 729 * k4));
            const State k6 = f(t + h,
                               y + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 + 46732.0 / 5247 * k3 +
                                        49.0 / 176 * k4 - 5103.0 / 18656 * k5));
            const State y5 = y + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 -
                                      2187.0 / 6784 * k5 + 11.0 / 84 * k6);
            const State k7 = f(t + h, y5);
            const State y4 = y + h * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 + 393.0 / 640 * k4 -
                                      92097.0 / 339200 * k5 + 187.0 / 2100 * k6 + 1.0 / 40 * k7);
            double err = 0.0;
            bool finite = true;
            for (int i = 0; i < N; ++i) {
                if (!std::isfinite(y5[i])) { finite = false; break; }
                const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
                err = std::max(err, std::abs(y5[i] - y4[i]) / sc);
            }
            if (finite && err <= 1.0) {
                t += h;
                y = y5;
                const double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                h *= std::min(5.0, std::max(0.2, fac));
                h = std::min(h, opt.max_step);
                return true;
            }
            const double fac = finite && err > 0 ? std::max(0.1, 0.9 * std::pow(err, -0.2)) : 0.1;
            h *= fac;
            if (!(std::abs(h) > 0) || std::abs(h) < 1e-300) return false;
        }
        return false;
    }
};

}  // namespace singflow
