#include "rds/events.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rds {

const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::ReachedHorizon: return "ReachedHorizon";
        case OutcomeKind::Blowup: return "Blowup";
        case OutcomeKind::Quench: return "Quench";
        case OutcomeKind::StepFailure: return "StepFailure";
    }
    return "?";
}

namespace {

// Sum of squared residuals of the linear fit log d = gamma*log(T-t) + c,
// and the fitted gamma.
double fit_sse(std::span<const double> t, std::span<const double> d, double T, double& gamma) {
    const std::size_t n = t.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(T - t[i]);
        const double y = std::log(d[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    gamma = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    const double c0 = (sy - gamma * sx) / n;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(d[i]) - gamma * std::log(T - t[i]) - c0;
        sse += r * r;
    }
    return sse;
}

SingularFit fit_window(std::span<const double> t, std::span<const double> d) {
    SingularFit out;
    const std::size_t n = t.size();
    if (n < 4) return out;
    const double t_last = t[n - 1];
    // secant projection of the hitting time scales the search bracket
    const double dd = d[0] - d[n - 1];
    double proj = dd > 0.0 ? d[n - 1] * (t_last - t[0]) / dd : (t_last - t[0]);
    proj = std::max(proj, 1e-300);
    double lo = std::log(1e-3 * proj);
    double hi = std::log(1e3 * proj);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double g1, g2;
    double f1 = fit_sse(t, d, t_last + std::exp(x1), g1);
    double f2 = fit_sse(t, d, t_last + std::exp(x2), g2);
    for (int i = 0; i < 80; ++i) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = fit_sse(t, d, t_last + std::exp(x1), g1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = fit_sse(t, d, t_last + std::exp(x2), g2);
        }
    }
    const double gap = std::exp(0.5 * (lo + hi));
    out.T_hat = t_last + gap;
    fit_sse(t, d, out.T_hat, out.gamma);
    out.valid = true;
    return out;
}

}  // namespace

SingularFit fit_singular_time(std::span<const double> t, std::span<const double> dist) {
    // keep only strictly positive distances with strictly increasing times
    std::vector<double> tt, dd;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (dist[i] > 0.0 && (tt.empty() || t[i] > tt.back())) {
            tt.push_back(t[i]);
            dd.push_back(dist[i]);
        }
    }
    SingularFit full = fit_window(tt, dd);
    if (!full.valid) return full;
    full.low_confidence = tt.size() < 8;
    // uncertainty: sensitivity to halving the window
    const std::size_t half = tt.size() / 2;
    SingularFit part = fit_window(std::span<const double>(tt).subspan(half),
                                  std::span<const double>(dd).subspan(half));
    double delta = part.valid ? std::fabs(part.T_hat - full.T_hat) : 0.0;
    full.uncertainty = delta + (full.T_hat - tt.back()) * 1e-3;
    return full;
}

}  // namespace rds
