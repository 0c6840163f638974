// ode.hpp: adaptive Dormand-Prince 5(4) for matrix-valued states.
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "qtransport/types.hpp"

namespace qtransport {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double initial_step = 0.01;
    double max_step = 1.0;
    long max_steps = 2'000'000;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evaluations = 0;
};

// Integrates y' = f(t, y) from t0 through the increasing `times`, landing
// exactly on each. `post(t, y)` runs after every accepted step and may
// project y (e.g. Hermitize); `emit(index, t, y)` receives the outputs.
template <class Rhs, class Post, class Emit>
OdeStats integrate_dopri5(Rhs&& f, CMatrix y, double t0, const std::vector<double>& times, const OdeOptions& opt,
                          Post&& post, Emit&& emit) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b*, the embedded fourth-order difference
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeStats stats;
    double t = t0;
    double h = opt.initial_step;
    std::size_t next = 0;
    while (next < times.size() && times[next] <= t0) emit(next++, t0, y);
    if (next == times.size()) return stats;

    CMatrix k1 = f(t, y);
    ++stats.rhs_evaluations;
    CMatrix k2, k3, k4, k5, k6, k7, y_new, err;
    const double span = times.back() - t0;
    while (next < times.size()) {
        const double target = times[next];
        h = std::min({h, opt.max_step, target - t});
        const bool lands = (t + h >= target - 1e-13 * std::max(1.0, std::abs(target)));
        const double step = lands ? target - t : h;

        k2 = f(t + c2 * step, y + step * (a21 * k1));
        k3 = f(t + c3 * step, y + step * (a31 * k1 + a32 * k2));
        k4 = f(t + c4 * step, y + step * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = f(t + c5 * step, y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = f(t + step, y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = f(t + step, y_new);
        stats.rhs_evaluations += 6;
        err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const Eigen::ArrayXXd scale =
            opt.atol + opt.rtol * y.cwiseAbs().array().max(y_new.cwiseAbs().array());
        const double ratio = (err.cwiseAbs().array() / scale).maxCoeff();
        if (!std::isfinite(ratio)) {
            std::ostringstream msg;
            msg << "integrator produced a non-finite state at t=" << t;
            throw NumericalFailure(msg.str());
        }
        if (ratio <= 1.0) {
            t = lands ? target : t + step;
            y = std::move(y_new);
            post(t, y);
            k1 = lands ? f(t, y) : std::move(k7);
            if (lands) ++stats.rhs_evaluations;
            ++stats.accepted;
            if (lands) emit(next++, t, y);
            const double grow = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
            h = step * std::min(5.0, std::max(0.2, grow));
            if (lands) h = std::max(h, step);
        } else {
            ++stats.rejected;
            h = step * std::max(0.2, 0.9 * std::pow(ratio, -0.2));
        }
        if (h < 1e-14 * std::max(1.0, span) || stats.accepted + stats.rejected > opt.max_steps) {
            std::ostringstream msg;
            msg << "adaptive integrator failed to converge at t=" << t << " (step " << h << ")";
            throw NumericalFailure(msg.str());
        }
    }
    return stats;
}

}  // namespace qtransport
