#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rds/events.hpp"
#include "rds/expr.hpp"
#include "rds/integrate.hpp"

namespace rds {

// Planar reaction system dw/dt = f(w,z), dz/dt = g(w,z).
struct OdeProblem {
    Expr f, g;  // over {w, z}, optionally with named parameters
    double c1 = 0.0, c2 = 0.0;
    double horizon = 1.0;
    std::optional<double> target_w;  // singular level monitored for quenching
    std::optional<double> target_z;
    std::map<std::string, double> constants;
    std::vector<double> sample_times;  // dense-output requests; empty -> 256 uniform
};

struct OdeTolerances {
    double rtol = 1e-10;
    double atol = 1e-12;
};

struct ComponentEvent {
    int component = 0;      // 0 = w, 1 = z
    bool to_target = false; // true: reached a singular level; false: diverging magnitude
    double target = 0.0;
    SingularFit fit;
};

struct OdeOutcome {
    OutcomeKind kind = OutcomeKind::ReachedHorizon;
    double t_end = 0.0;
    std::array<double, 2> y_end{0.0, 0.0};
    double T_hat = 0.0, T_hat_uncertainty = 0.0, gamma = 0.0;
    bool low_confidence = false;
    std::vector<ComponentEvent> component_events;

    std::vector<double> sample_t;
    std::vector<std::array<double, 2>> sample_y;

    // accepted-step history
    std::vector<double> step_t;
    std::vector<std::array<double, 2>> step_y;
    std::vector<std::array<double, 2>> step_dy;
    std::vector<double> step_h;

    std::string note;
};

OdeOutcome integrate(const OdeProblem& p, const OdeTolerances& tol = {},
                     const EventConfig& events = {});

// Closed-form candidate (M/(1-c t), N/(1-c t)) for systems
// f = A w^2 z - B w^p, g = C w z^2 - D z^q, with c = min(AMN - BM^(p-1), CMN - DN^(q-1)).
struct RationalBlowupFamily {
    double M = 1.0, N = 1.0;
    double A = 1.0, B = 1.0, C = 1.0, D = 1.0, p = 1.0, q = 1.0;
};

struct SubsolutionReport {
    bool side_conditions_ok = false;  // A M^2 N > B M^p and C M N^2 > D N^q
    double c = 0.0;                   // growth rate of the family
    double max_violation = 0.0;       // max over the grid of (candidate' - field)+
    std::vector<double> t_grid;
    std::vector<double> violation_w, violation_z;
};

SubsolutionReport check_subsolution_family(const OdeProblem& p, const RationalBlowupFamily& fam,
                                           const std::vector<double>& t_grid);

// Pointwise check of a user-supplied candidate pair (w(t), z(t)) given as
// expressions in t; derivatives by central differences.
SubsolutionReport check_subsolution_custom(const OdeProblem& p, const Expr& w_of_t,
                                           const Expr& z_of_t, const std::vector<double>& t_grid);

struct ProductSeries {
    std::vector<double> t;
    std::vector<double> value;  // w^alpha * z^beta at dense samples
    double max_value = 0.0, min_value = 0.0;
};

ProductSeries product_monitor(const OdeOutcome& outcome, double alpha, double beta);

// Dense output as CSV: t, w, z, dt plus one column per monitored product.
void write_trajectory_csv(const OdeOutcome& outcome, const std::string& path,
                          const std::vector<ProductSeries>& monitors = {},
                          const std::vector<std::string>& monitor_names = {});

}  // namespace rds
