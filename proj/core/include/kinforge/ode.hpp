#ifndef KINFORGE_ODE_HPP
#define KINFORGE_ODE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace kinforge {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double h_max = 1.0;
    double h_min = 1e-12;
    long max_steps = 10'000'000;
};

enum class StopReason { ReachedEnd, Event, Failed };

struct IntegrateResult {
    StopReason reason = StopReason::ReachedEnd;
    double t = 0.0;
    std::string error;
};

namespace ode_detail {

inline void hermite(double h, const std::vector<double>& y0, const std::vector<double>& f0,
                    const std::vector<double>& y1, const std::vector<double>& f1, double theta,
                    std::vector<double>& out) {
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + theta;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    out.resize(y0.size());
    for (std::size_t i = 0; i < y0.size(); ++i)
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
}

}  // namespace ode_detail

/// Embedded Dormand-Prince 5(4) pair with step-size control. Lands exactly on
/// every time in `stops` (sorted, inside (t0, t1]) and calls on_sample there.
/// If `event` is non-null, an event fires when the sign of event(t, y) >= 0
/// leaves the caller-declared side `event_side_nonneg`; the crossing is
/// located by bisection on the cubic Hermite interpolant, the span up to it
/// is re-integrated under full error control, and the function returns
/// StopReason::Event with t and y at the crossing. Declaring the side (rather
/// than sampling the sign at t0) keeps a restart exactly on the switch from
/// re-firing the event it just handled.
template <class F>
IntegrateResult integrate_dopri5(F&& f, double t0, double t1, std::vector<double>& y,
                                 const OdeOptions& opt,
                                 const std::vector<double>& stops = {},
                                 const std::function<void(double, const std::vector<double>&)>& on_sample = nullptr,
                                 const std::function<double(double, const std::vector<double>&)>& event = nullptr,
                                 bool event_side_nonneg = true) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yint(n);

    double t = t0;
    if (t1 <= t0) return {StopReason::ReachedEnd, t0, ""};
    std::size_t next_stop = 0;
    while (next_stop < stops.size() && stops[next_stop] <= t0 + 1e-12) ++next_stop;

    f(t, y.data(), k1.data());
    double h = std::min(opt.h_max, (t1 - t0) / 100.0);
    bool k1_fresh = true;

    for (long step = 0; step < opt.max_steps; ++step) {
        if (t >= t1 - 1e-12 * std::max(1.0, std::abs(t1))) return {StopReason::ReachedEnd, t1, ""};

        double target = t1;
        if (next_stop < stops.size()) target = std::min(target, stops[next_stop]);
        h = std::min(h, opt.h_max);
        bool hit_target = false;
        if (t + h >= target - 1e-12) {
            h = target - t;
            hit_target = true;
        }
        if (h < opt.h_min)
            return {StopReason::Failed, t, "step size underflow at t=" + std::to_string(t)};

        if (!k1_fresh) {
            f(t, y.data(), k1.data());
            k1_fresh = true;
        }
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp.data(), k2.data());
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp.data(), k3.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp.data(), k4.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, ytmp.data(), k5.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + h, ytmp.data(), k6.data());
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        f(t + h, ynew.data(), k7.data());

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                  e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (!std::isfinite(err) || err > 1.0) {
            const double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            h *= factor;
            continue;
        }

        // Accepted.
        const double t_new = t + h;
        if (event) {
            const double g_new = event(t_new, ynew);
            if ((g_new >= 0.0) != event_side_nonneg) {
                // Locate the crossing on the Hermite interpolant, then redo the
                // span up to it under error control so state accuracy at the
                // switch matches the requested tolerances.
                double lo = 0.0, hi = 1.0;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    ode_detail::hermite(h, y, k1, ynew, k7, mid, yint);
                    const double g_mid = event(t + mid * h, yint);
                    if ((g_mid >= 0.0) != event_side_nonneg)
                        hi = mid;
                    else
                        lo = mid;
                }
                const double t_cross = t + hi * h;
                if (t_cross > t + opt.h_min) {
                    IntegrateResult sub = integrate_dopri5(f, t, t_cross, y, opt);
                    if (sub.reason == StopReason::Failed) return sub;
                } else {
                    ode_detail::hermite(h, y, k1, ynew, k7, hi, y);
                }
                return {StopReason::Event, t_cross, ""};
            }
        }

        t = t_new;
        y = ynew;
        k1 = k7;  // FSAL
        k1_fresh = true;

        if (hit_target && next_stop < stops.size() && std::abs(t - stops[next_stop]) <= 1e-9) {
            if (on_sample) on_sample(stops[next_stop], y);
            ++next_stop;
        }

        const double grow = err > 1e-12 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
        h = std::max(h * grow, opt.h_min * 2);
    }
    return {StopReason::Failed, t, "max step count exceeded"};
}

}  // namespace kinforge

#endif
