#include "rds/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <limits>

namespace rds {

const char* to_string(TailVerdict v) {
    switch (v) {
        case TailVerdict::Converges: return "Converges";
        case TailVerdict::Diverges: return "Diverges";
        case TailVerdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

namespace {

// Gauss 7 / Kronrod 15 abscissae (positive half) and weights.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
    double integral;
    double error;
};

template <class F>
PanelResult gk15(const F& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(mid - half * kXgk[i]);
        fv[14 - i] = f(mid + half * kXgk[i]);
    }
    fv[7] = f(mid);
    for (int i = 0; i < 15; ++i)
        if (!std::isfinite(fv[i]))
            throw NonFiniteIntegrand(mid + half * ((i < 7) ? -kXgk[i] : (i == 7 ? 0.0 : kXgk[14 - i])));
    double kron = kWgk[7] * fv[7];
    double gauss = kWg[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        kron += kWgk[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) gauss += kWg[i / 2] * (fv[i] + fv[14 - i]);
    }
    kron *= half;
    gauss *= half;
    return {kron, std::fabs(kron - gauss)};
}

}  // namespace

double integrate_gk(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    struct Seg {
        double a, b;
        int depth;
    };
    std::vector<Seg> stack{{a, b, 0}};
    double total = 0.0;
    while (!stack.empty()) {
        Seg s = stack.back();
        stack.pop_back();
        PanelResult r = gk15(f, s.a, s.b);
        const double width = s.b - s.a;
        const bool tiny = width <= 8.0 * DBL_EPSILON * std::max({std::fabs(s.a), std::fabs(s.b), 1.0});
        if (r.error <= rel_tol * std::fabs(r.integral) + DBL_MIN || s.depth >= 60 || tiny) {
            total += r.integral;
            continue;
        }
        const double mid = 0.5 * (s.a + s.b);
        stack.push_back({s.a, mid, s.depth + 1});
        stack.push_back({mid, s.b, s.depth + 1});
    }
    return sign * total;
}

Antiderivative::Antiderivative(std::function<double(double)> psi, double c, double rel_tol)
    : psi_(std::move(psi)), c_(c), rel_tol_(rel_tol) {
    xs_.push_back(c);
    vals_.push_back(0.0);
}

double Antiderivative::cached_eval(double x) const {
    if (x < c_) return -integrate_gk(psi_, x, c_, rel_tol_);
    // largest cached abscissa <= x
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    if (xs_[i] == x) return vals_[i];
    const double val = vals_[i] + integrate_gk(psi_, xs_[i], x, rel_tol_);
    const double gap = x - xs_[i];
    if (xs_.size() < 50000 && gap > 1e-9 * std::max(std::fabs(x), 1.0)) {
        xs_.insert(xs_.begin() + static_cast<std::ptrdiff_t>(i) + 1, x);
        vals_.insert(vals_.begin() + static_cast<std::ptrdiff_t>(i) + 1, val);
    }
    return val;
}

double Antiderivative::operator()(double x) const {
    std::lock_guard<std::mutex> lock(mu_);
    return cached_eval(x);
}

double Antiderivative::inverse(double y, double tol_inv, double x_cap, double hint) const {
    if (y <= 0.0) {
        if (y >= -tol_inv) return c_;
        throw std::domain_error("inverse of an antiderivative requires y >= 0");
    }
    double lo = c_;
    double hi;
    if (std::isfinite(hint) && hint > c_) {
        hi = hint;
    } else {
        hi = c_ == 0.0 ? 1.0 : c_ + std::max(1.0, std::fabs(c_));
    }
    double fhi = (*this)(hi);
    while (fhi < y) {
        lo = hi;
        hi = hi <= 0.0 ? 1.0 : hi * 2.0;
        if (hi > x_cap) throw RangeExhausted(y, x_cap);
        fhi = (*this)(hi);
    }
    // bisect to a narrow bracket, then Newton polish with d/dx F = psi
    const double ytol = tol_inv * (1.0 + std::fabs(y));
    for (int i = 0; i < 200 && (hi - lo) > DBL_EPSILON * std::max(1.0, std::fabs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = (*this)(mid);
        if (std::fabs(fm - y) <= ytol) {
            lo = hi = mid;
            break;
        }
        if (fm < y) lo = mid; else hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 8; ++i) {
        const double fx = (*this)(x);
        if (std::fabs(fx - y) <= ytol) return x;
        const double slope = psi_(x);
        if (!(slope > 0.0) || !std::isfinite(slope)) break;
        double next = x - (fx - y) / slope;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        if (fx < y) lo = x; else hi = x;
        x = next;
    }
    return x;
}

double invert(const Antiderivative& F, double y) { return F.inverse(y); }

namespace {

// Least squares of y on the given regressor columns; columns are centered and
// range-scaled before solving to tame near-collinear log levels. Returns raw
// coefficients (excluding the intercept) in `coef`.
bool least_squares(const std::vector<std::vector<double>>& cols, const std::vector<double>& y,
                   std::vector<double>& coef) {
    const std::size_t n = y.size();
    const std::size_t m = cols.size();
    if (n < m + 2) return false;
    std::vector<long double> mean(m, 0.0L), scale(m, 1.0L);
    std::vector<std::vector<long double>> X(m, std::vector<long double>(n));
    for (std::size_t j = 0; j < m; ++j) {
        long double mn = cols[j][0], mx = cols[j][0], sum = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            sum += cols[j][i];
            mn = std::min<long double>(mn, cols[j][i]);
            mx = std::max<long double>(mx, cols[j][i]);
        }
        mean[j] = sum / n;
        scale[j] = (mx - mn) > 0.0L ? (mx - mn) : 1.0L;
        for (std::size_t i = 0; i < n; ++i) X[j][i] = (cols[j][i] - mean[j]) / scale[j];
    }
    long double ymean = 0.0L;
    for (std::size_t i = 0; i < n; ++i) ymean += y[i];
    ymean /= n;

    // normal equations
    std::vector<std::vector<long double>> A(m, std::vector<long double>(m + 1, 0.0L));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = j; k < m; ++k) {
            long double s = 0.0L;
            for (std::size_t i = 0; i < n; ++i) s += X[j][i] * X[k][i];
            A[j][k] = s;
            if (k != j) A[k][j] = s;
        }
        long double s = 0.0L;
        for (std::size_t i = 0; i < n; ++i) s += X[j][i] * (y[i] - (double)ymean);
        A[j][m] = s;
    }
    // gaussian elimination with partial pivoting
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::fabs((double)A[r][col]) > std::fabs((double)A[piv][col])) piv = r;
        if (std::fabs((double)A[piv][col]) < 1e-30) return false;
        std::swap(A[piv], A[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col) continue;
            long double f = A[r][col] / A[col][col];
            for (std::size_t k = col; k <= m; ++k) A[r][k] -= f * A[col][k];
        }
    }
    coef.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) coef[j] = (double)(A[j][m] / A[j][j] / scale[j]);
    return true;
}

struct SideDecision {
    bool conv_side = false;  // fitted exponents point at convergence
    bool valid = false;
};

}  // namespace

TailReport classify_tail(const std::function<double(double)>& psi, double c, const TailOptions& opts) {
    TailReport rep;
    const double start = c > 0.0 ? c : 1.0;
    if (start != c) rep.note = "lower limit shifted to 1 for tail sampling; ";

    std::vector<double> S, V, P, D;
    double accumulated = 0.0;
    bool underflow = false;
    int settled_run = 0;

    auto try_psi = [&](double s, double& out) -> bool {
        try {
            out = psi(s);
        } catch (const std::exception&) {
            return false;
        }
        return std::isfinite(out);
    };

    const double delta = opts.delta_alpha;

    // Decide convergent/divergent side from the lexicographic exponent fit.
    auto fit_side = [&](SideDecision& side) {
        rep.fit_valid = false;
        rep.fit_levels = 0;
        const std::size_t n = S.size();
        if (n < 3) return;
        std::size_t lo = n / 2;
        std::vector<double> ls, lls, llls, lv;
        for (std::size_t i = lo; i < n; ++i) {
            if (V[i] <= 0.0) continue;
            const double l1 = std::log(S[i]);
            if (l1 <= 0.0) continue;
            ls.push_back(l1);
            lv.push_back(std::log(V[i]));
            const double l2 = std::log(l1);
            lls.push_back(l2);
            llls.push_back(l2 > 0.0 ? std::log(l2) : 0.0);
        }
        auto range = [](const std::vector<double>& v) {
            auto [mn, mx] = std::minmax_element(v.begin(), v.end());
            return *mx - *mn;
        };
        if (ls.size() < 3 || range(ls) < 0.5) return;
        bool ok = false;
        std::vector<double> coef;
        bool lll_usable = llls.size() >= 8 && range(llls) > 0.02 &&
                          *std::min_element(lls.begin(), lls.end()) > 0.05;
        if (lll_usable) {
            ok = least_squares({ls, lls, llls}, lv, coef);
            if (ok) rep.fit_levels = 3;
        }
        if (!ok && ls.size() >= 5 && range(lls) > 0.02) {
            ok = least_squares({ls, lls}, lv, coef);
            if (ok) {
                rep.fit_levels = 2;
                coef.push_back(0.0);
            }
        }
        if (!ok) {
            ok = least_squares({ls}, lv, coef);
            if (ok) {
                rep.fit_levels = 1;
                coef.push_back(0.0);
                coef.push_back(0.0);
            }
        }
        if (!ok) return;
        rep.alpha = -coef[0];
        rep.beta = -coef[1];
        rep.gamma = -coef[2];
        rep.fit_valid = true;
        side.valid = true;
        if (rep.alpha > 1.0 + delta) side.conv_side = true;
        else if (rep.alpha < 1.0 - delta) side.conv_side = false;
        else if (rep.beta > 1.0 + delta) side.conv_side = true;
        else if (rep.beta < 1.0 - delta) side.conv_side = false;
        else side.conv_side = rep.gamma > 1.0 + delta;
    };

    // Corroboration from the increment sequence: geometric trend first, then
    // a polynomial-in-k fit mirroring the lexicographic exponent rule.
    auto partial_flags = [&](bool& growing, bool& cauchy) {
        growing = cauchy = false;
        if (P.empty()) return;
        double first_pos = 0.0;
        for (double p : P)
            if (p > 0.0) {
                first_pos = p;
                break;
            }
        rep.growth_ratio = first_pos > 0.0 ? P.back() / first_pos : 0.0;
        if (rep.settled) {
            cauchy = true;
            return;
        }
        bool growing_d = false, cauchy_d = false;
        std::vector<double> ks, lks, llks, ld;
        for (std::size_t k = std::max<std::size_t>(3, D.size() / 2); k < D.size(); ++k) {
            if (D[k] <= 0.0) continue;
            ks.push_back(static_cast<double>(k));
            lks.push_back(std::log(static_cast<double>(k)));
            llks.push_back(std::log(std::log(static_cast<double>(k))));
            ld.push_back(std::log(D[k]));
        }
        std::vector<double> coef;
        bool ok = ks.size() >= 8 && least_squares({ks, lks, llks}, ld, coef);
        if (!ok && ks.size() >= 6) {
            ok = least_squares({ks, lks}, ld, coef);
            if (ok) coef.push_back(0.0);
        }
        if (ok) {
            const double sigma = coef[0];      // per-doubling log trend
            const double m1 = -coef[1], m2 = -coef[2];
            const double sig_tol = 0.015;
            if (sigma <= -sig_tol) cauchy_d = true;
            else if (sigma >= sig_tol) growing_d = true;
            else if (m1 > 1.0 + delta) cauchy_d = true;
            else if (m1 < 1.0 - delta) growing_d = true;
            else if (m2 > 1.0 + delta) cauchy_d = true;
            else growing_d = true;
        } else {
            // too little data for a trend fit: crude ratio of increments
            double dfirst = 0.0, dlast = 0.0;
            for (double d : D)
                if (d > 0.0) {
                    if (dfirst == 0.0) dfirst = d;
                    dlast = d;
                }
            if (dfirst > 0.0) {
                if (dlast <= 0.3 * dfirst) cauchy_d = true;
                else if (dlast >= 0.5 * dfirst) growing_d = true;
            }
        }
        growing = growing_d && rep.growth_ratio >= 2.0;
        cauchy = cauchy_d && !growing;
    };

    auto decide = [&]() {
        SideDecision side;
        fit_side(side);
        bool growing = false, cauchy = false;
        partial_flags(growing, cauchy);
        if (side.valid) {
            if (side.conv_side) {
                if (cauchy) return TailVerdict::Converges;
                rep.note += "exponent fit says converge, partial sums inconclusive; ";
                return TailVerdict::Inconclusive;
            }
            if (growing) return TailVerdict::Diverges;
            if (rep.settled) return TailVerdict::Converges;
            return TailVerdict::Inconclusive;
        }
        if (rep.settled) return TailVerdict::Converges;
        if (growing) return TailVerdict::Diverges;
        return TailVerdict::Inconclusive;
    };

    double prev = start;
    double v0 = 0.0;
    if (!try_psi(start, v0) || v0 < 0.0) {
        rep.truncated = true;
        rep.note += "integrand not evaluable/positive at lower limit; ";
        rep.verdict = TailVerdict::Inconclusive;
        return rep;
    }
    S.push_back(start);
    V.push_back(v0);
    P.push_back(0.0);
    D.push_back(0.0);

    TailVerdict milestone_verdict = TailVerdict::Inconclusive;
    for (int k = 1; k <= opts.max_cutoffs; ++k) {
        const double s = start * std::ldexp(1.0, k);
        if (!(s <= opts.cutoff_cap)) break;
        double v = 0.0;
        if (!try_psi(s, v)) {
            rep.truncated = true;
            rep.note += "integrand failed near s=" + std::to_string(prev) + "; ";
            break;
        }
        if (v < 0.0) {
            rep.truncated = true;
            rep.note += "integrand went negative; ";
            break;
        }
        if (v == 0.0) underflow = true;
        double inc = 0.0;
        try {
            inc = integrate_gk(psi, prev, s, opts.panel_rel_tol);
        } catch (const std::exception&) {
            rep.truncated = true;
            rep.note += "panel integration failed near s=" + std::to_string(prev) + "; ";
            break;
        }
        if (inc < 0.0) inc = 0.0;
        accumulated += inc;
        S.push_back(s);
        V.push_back(v);
        P.push_back(accumulated);
        D.push_back(inc);
        prev = s;
        if (inc <= 1e-11 * std::max(accumulated, DBL_MIN)) {
            if (++settled_run >= 2) {
                rep.settled = true;
                break;
            }
        } else {
            settled_run = 0;
        }
        if (underflow) break;
        if (k >= 2 * opts.fit_cutoffs && (k & (k - 1)) == 0) {  // power-of-two milestones
            TailVerdict v_now = decide();
            if (v_now != TailVerdict::Inconclusive && v_now == milestone_verdict) break;
            milestone_verdict = v_now;
        }
    }

    rep.cutoffs = S;
    rep.partials = P;
    rep.verdict = decide();
    if (rep.settled && rep.note.find("settled") == std::string::npos)
        rep.note += "partial sums settled; ";
    if (rep.truncated) rep.note += "data truncated before cutoff budget; ";
    return rep;
}

}  // namespace rds
