#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rds {

struct StepControl {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_min_factor = 1e-14;  // h_min = factor * max(1, |t|)
    double safety = 0.9;
    double max_factor = 6.0;
    double min_factor = 0.2;
    double pi_beta = 0.04;  // PI controller damping exponent
};

enum class StopReason { Horizon, Callback, StepTooSmall, RhsFailure };

struct StepRecord {
    double t;
    double h;  // size of the step that produced this state
};

// Dormand-Prince 5(4) with PI step control. The RHS writes dy in place;
// it may throw to signal an unevaluable state (the step is then rejected
// and retried smaller). `max_dt` (optional) caps the step (CFL, event
// approach). `on_accept` sees every accepted step and may stop the run.
// `landings` are times the integrator must hit exactly; `on_landing` is
// called there.
struct Dopri5 {
    using Rhs = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dy)>;
    using MaxDt = std::function<double(double t, const std::vector<double>& y,
                                       const std::vector<double>& dy)>;
    using Accept = std::function<bool(double t, const std::vector<double>& y,
                                      const std::vector<double>& dy, double h)>;
    using Landing = std::function<void(double t, const std::vector<double>& y)>;

    Rhs rhs;
    StepControl control;
    MaxDt max_dt;      // optional
    Accept on_accept;  // optional
    Landing on_landing;  // optional

    struct Result {
        StopReason reason;
        double t_end;
        std::vector<double> y_end;
        std::vector<double> dy_end;
        double last_h = 0.0;
        long accepted = 0, rejected = 0;
        std::string note;
    };

    Result run(double t0, std::vector<double> y0, double t_end,
               const std::vector<double>& landings = {}) const;
};

}  // namespace rds
