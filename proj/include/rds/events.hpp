#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace rds {

// Shared singular-event thresholds, one block for ODE and PDE runs so
// uniform-data cross-validation compares like with like.
struct EventConfig {
    double blow_threshold = 1e12;     // state magnitude that counts as "infinite"
    double blow_h_collapse = 1e-6;    // ...but only with step size below this * max(1,|t|)
    double quench_margin = 1e-6;      // distance to target, relative to the initial distance
    double quench_deriv_growth = 1e4; // reaction magnitude growth factor over its initial scale
    double approach_dt_frac = 0.1;    // near targets: dt <= frac * distance / |rate|
};

enum class OutcomeKind { ReachedHorizon, Blowup, Quench, StepFailure };

const char* to_string(OutcomeKind k);

// Least-squares fit of log(distance) = gamma*log(T-t) + const over a window of
// accepted steps approaching a singularity; T found by golden-section search.
struct SingularFit {
    double T_hat = 0.0;
    double gamma = 0.0;
    double uncertainty = 0.0;
    bool low_confidence = false;  // fewer than 8 usable steps
    bool valid = false;
};

SingularFit fit_singular_time(std::span<const double> t, std::span<const double> dist);

}  // namespace rds
