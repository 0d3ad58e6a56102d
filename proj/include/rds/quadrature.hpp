#pragma once

#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rds {

struct NonFiniteIntegrand : std::runtime_error {
    explicit NonFiniteIntegrand(double at)
        : std::runtime_error("integrand non-finite at " + std::to_string(at)), where(at) {}
    double where;
};

// Bracket extension in invert() ran past x_max_cap. A signal, not a failure:
// composed criterion integrands may saturate double range, in which case the
// tail classifier works on the partial data.
struct RangeExhausted : std::runtime_error {
    RangeExhausted(double y_, double cap_)
        : std::runtime_error("inverse bracket exceeded cap"), y(y_), cap(cap_) {}
    double y, cap;
};

// F(x) = integral of psi from c to x, by adaptive Gauss-Kronrod panels with
// cumulative node caching. Queries are serialized by an internal lock, so a
// const instance is safe to share between threads.
class Antiderivative {
public:
    Antiderivative(std::function<double(double)> psi, double c, double rel_tol = 1e-10);

    double operator()(double x) const;
    double base() const { return c_; }
    double rel_tol() const { return rel_tol_; }
    double psi(double x) const { return psi_(x); }

    // Solve F(x) = y for x >= c by bracket doubling + bisection + Newton
    // polish; |F(x)-y| <= tol_inv*(1+|y|). `hint`, when finite, seeds the
    // bracket (useful for monotone query sequences).
    double inverse(double y, double tol_inv = 1e-10, double x_cap = 1e300,
                   double hint = std::numeric_limits<double>::quiet_NaN()) const;

private:
    double cached_eval(double x) const;  // caller holds mu_

    std::function<double(double)> psi_;
    double c_;
    double rel_tol_;
    mutable std::mutex mu_;
    mutable std::vector<double> xs_, vals_;  // sorted cumulative cache, seeded with (c, 0)
};

double invert(const Antiderivative& F, double y);

// One adaptive Gauss-Kronrod integration over [a, b].
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol = 1e-10);

enum class TailVerdict { Converges, Diverges, Inconclusive };

const char* to_string(TailVerdict v);

struct TailOptions {
    int fit_cutoffs = 40;        // cutoffs c*2^k used for the exponent fit
    int max_cutoffs = 1000;      // extension budget for the partial sums
    double cutoff_cap = 1e300;
    double delta_alpha = 0.05;   // classification margin on fitted exponents
    double panel_rel_tol = 1e-9;
};

struct TailReport {
    double alpha = 0.0;               // fitted tail exponent: psi ~ s^-alpha
    double beta = 0.0;                // log-correction exponent
    double gamma = 0.0;               // second-level log correction
    int fit_levels = 0;               // how many log levels the fit resolved
    bool fit_valid = false;
    std::vector<double> cutoffs;      // geometric cutoffs actually sampled
    std::vector<double> partials;     // partial integrals at those cutoffs
    TailVerdict verdict = TailVerdict::Inconclusive;
    bool truncated = false;           // data ended early (overflow/domain/range)
    bool settled = false;             // increments negligible: numerically converged
    double growth_ratio = 0.0;        // last partial / first positive partial
    std::string note;
    std::string label;                // caller-assigned, carried into reports
};

// Heuristic convergence classification of the improper integral of psi over
// [c, +inf). psi must be positive at the sampled cutoffs; evaluation failures
// truncate the data and the verdict falls back to the partial sums.
TailReport classify_tail(const std::function<double(double)>& psi, double c,
                         const TailOptions& opts = {});

}  // namespace rds
