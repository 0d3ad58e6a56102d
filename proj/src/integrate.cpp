#include "rds/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace rds {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Dopri5::Result Dopri5::run(double t0, std::vector<double> y0, double t_end,
                           const std::vector<double>& landings) const {
    const std::size_t n = y0.size();
    Result res;
    res.reason = StopReason::Horizon;

    std::vector<double> y = std::move(y0);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);

    double t = t0;
    auto eval = [&](double tt, const std::vector<double>& yy, std::vector<double>& out) -> bool {
        try {
            rhs(tt, yy, out);
        } catch (...) {
            return false;
        }
        for (double v : out)
            if (!std::isfinite(v)) return false;
        return true;
    };

    if (!eval(t, y, k1)) {
        res.reason = StopReason::RhsFailure;
        res.note = "right-hand side not evaluable at the initial state";
        res.t_end = t;
        res.y_end = y;
        res.dy_end = k1;
        return res;
    }

    std::size_t next_landing = 0;
    while (next_landing < landings.size() && landings[next_landing] <= t) {
        if (landings[next_landing] == t && on_landing) on_landing(t, y);
        ++next_landing;
    }

    // initial step guess from the RHS scale
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::fabs(k1[i]) / (control.atol + control.rtol * std::fabs(y[i]));
        scale = std::max(scale, s);
    }
    double h = scale > 0.0 ? 0.01 / scale : 1e-3 * std::max(1.0, std::fabs(t_end - t0));
    h = std::min(h, t_end - t0);
    double err_prev = 1.0;

    while (t < t_end) {
        if (max_dt) {
            const double cap = max_dt(t, y, k1);
            if (cap > 0.0) h = std::min(h, cap);
        }
        double t_next = t + h;
        int land_idx = -1;
        if (next_landing < landings.size() && landings[next_landing] <= t_next) {
            t_next = landings[next_landing];
            land_idx = static_cast<int>(next_landing);
        }
        if (t_next > t_end) {
            t_next = t_end;
            land_idx = -1;
        }
        const double h_try = t_next - t;
        const double h_min = control.h_min_factor * std::max(1.0, std::fabs(t));
        if (h_try < h_min) {
            res.reason = StopReason::StepTooSmall;
            res.note = "step size underflow at t=" + std::to_string(t);
            break;
        }

        bool ok = true;
        const double hh = h_try;
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hh * a21 * k1[i];
        ok = eval(t + c2 * hh, ytmp, k2);
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hh * (a31 * k1[i] + a32 * k2[i]);
            ok = eval(t + c3 * hh, ytmp, k3);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + hh * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            ok = eval(t + c4 * hh, ytmp, k4);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + hh * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            ok = eval(t + c5 * hh, ytmp, k5);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + hh * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                       a65 * k5[i]);
            ok = eval(t + hh, ytmp, k6);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i)
                ynew[i] =
                    y[i] + hh * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
            ok = eval(t + hh, ynew, k7);
        }
        if (!ok) {
            h = 0.25 * hh;
            ++res.rejected;
            continue;
        }

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = hh * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                   e7 * k7[i]);
            const double sc =
                control.atol + control.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            const double q = e / sc;
            err += q * q;
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (err <= 1.0) {
            t = t_next;  // exact landing on requested times / horizon
            std::swap(y, ynew);
            std::swap(k1, k7);
            ++res.accepted;
            res.last_h = hh;
            if (land_idx >= 0) {
                if (on_landing) on_landing(t, y);
                ++next_landing;
            }
            if (on_accept && !on_accept(t, y, k1, hh)) {
                res.reason = StopReason::Callback;
                break;
            }
            const double fac = control.safety * std::pow(err > 0.0 ? err : 1e-16, -0.2) *
                               std::pow(err_prev > 0.0 ? err_prev : 1e-16, control.pi_beta);
            err_prev = err;
            h = hh * std::clamp(fac, control.min_factor, control.max_factor);
        } else {
            h = hh * std::max(control.min_factor, control.safety * std::pow(err, -0.2));
            ++res.rejected;
        }
    }

    res.t_end = t;
    res.y_end = y;
    res.dy_end = k1;
    return res;
}

}  // namespace rds
