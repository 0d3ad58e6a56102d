#include "rds/ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace rds {

namespace {

struct BoundSystem {
    Expr f, g;
    std::vector<double> env_f, env_g;
    int fw = -1, fz = -1, gw = -1, gz = -1;

    BoundSystem(const Expr& f_, const Expr& g_, const std::map<std::string, double>& constants)
        : f(f_), g(g_) {
        env_f.assign(f.symbols().size(), 0.0);
        env_g.assign(g.symbols().size(), 0.0);
        for (std::size_t i = 0; i < f.symbols().size(); ++i) {
            const auto& s = f.symbols()[i];
            if (s.name == "w") fw = static_cast<int>(i);
            else if (s.name == "z") fz = static_cast<int>(i);
            else if (auto it = constants.find(s.name); it != constants.end()) env_f[i] = it->second;
            else throw std::invalid_argument("unbound constant '" + s.name + "' in f");
        }
        for (std::size_t i = 0; i < g.symbols().size(); ++i) {
            const auto& s = g.symbols()[i];
            if (s.name == "w") gw = static_cast<int>(i);
            else if (s.name == "z") gz = static_cast<int>(i);
            else if (auto it = constants.find(s.name); it != constants.end()) env_g[i] = it->second;
            else throw std::invalid_argument("unbound constant '" + s.name + "' in g");
        }
    }

    double eval_f(double w, double z) {
        if (fw >= 0) env_f[static_cast<std::size_t>(fw)] = w;
        if (fz >= 0) env_f[static_cast<std::size_t>(fz)] = z;
        return f.eval(env_f);
    }
    double eval_g(double w, double z) {
        if (gw >= 0) env_g[static_cast<std::size_t>(gw)] = w;
        if (gz >= 0) env_g[static_cast<std::size_t>(gz)] = z;
        return g.eval(env_g);
    }
};

}  // namespace

OdeOutcome integrate(const OdeProblem& p, const OdeTolerances& tol, const EventConfig& events) {
    OdeOutcome out;
    BoundSystem sys(p.f, p.g, p.constants);

    std::vector<double> landings = p.sample_times;
    if (landings.empty()) {
        const int n = 256;
        for (int i = 0; i <= n; ++i) landings.push_back(p.horizon * i / n);
    }
    std::sort(landings.begin(), landings.end());

    const double d0_w = p.target_w ? std::fabs(p.c1 - *p.target_w) : 0.0;
    const double d0_z = p.target_z ? std::fabs(p.c2 - *p.target_z) : 0.0;

    double ref_w = 1e-8, ref_z = 1e-8;
    {
        const double fw0 = sys.eval_f(p.c1, p.c2);
        const double gz0 = sys.eval_g(p.c1, p.c2);
        ref_w = std::max(std::fabs(fw0), 1e-8);
        ref_z = std::max(std::fabs(gz0), 1e-8);
    }

    int trigger_comp = -1;
    bool trigger_quench = false;

    Dopri5 stepper;
    stepper.control.rtol = tol.rtol;
    stepper.control.atol = tol.atol;
    stepper.rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy[0] = sys.eval_f(y[0], y[1]);
        dy[1] = sys.eval_g(y[0], y[1]);
    };
    stepper.max_dt = [&](double, const std::vector<double>& y, const std::vector<double>& dy) {
        double cap = 0.0;
        if (p.target_w && dy[0] != 0.0) {
            const double d = std::fabs(y[0] - *p.target_w);
            cap = events.approach_dt_frac * d / std::fabs(dy[0]);
        }
        if (p.target_z && dy[1] != 0.0) {
            const double d = std::fabs(y[1] - *p.target_z);
            const double c2cap = events.approach_dt_frac * d / std::fabs(dy[1]);
            cap = cap > 0.0 ? std::min(cap, c2cap) : c2cap;
        }
        return cap;
    };
    stepper.on_accept = [&](double t, const std::vector<double>& y, const std::vector<double>& dy,
                            double h) {
        out.step_t.push_back(t);
        out.step_y.push_back({y[0], y[1]});
        out.step_dy.push_back({dy[0], dy[1]});
        out.step_h.push_back(h);
        if (p.target_w && d0_w > 0.0) {
            const double d = std::fabs(y[0] - *p.target_w);
            if (d <= events.quench_margin * d0_w &&
                std::fabs(dy[0]) >= events.quench_deriv_growth * ref_w) {
                trigger_comp = 0;
                trigger_quench = true;
                return false;
            }
        }
        if (p.target_z && d0_z > 0.0) {
            const double d = std::fabs(y[1] - *p.target_z);
            if (d <= events.quench_margin * d0_z &&
                std::fabs(dy[1]) >= events.quench_deriv_growth * ref_z) {
                trigger_comp = 1;
                trigger_quench = true;
                return false;
            }
        }
        const double h_collapse = events.blow_h_collapse * std::max(1.0, std::fabs(t));
        for (int i = 0; i < 2; ++i) {
            if (std::fabs(y[static_cast<std::size_t>(i)]) >= events.blow_threshold &&
                h <= h_collapse) {
                trigger_comp = i;
                trigger_quench = false;
                return false;
            }
        }
        return true;
    };
    stepper.on_landing = [&](double t, const std::vector<double>& y) {
        out.sample_t.push_back(t);
        out.sample_y.push_back({y[0], y[1]});
    };

    Dopri5::Result r = stepper.run(0.0, {p.c1, p.c2}, p.horizon, landings);
    out.t_end = r.t_end;
    out.y_end = {r.y_end[0], r.y_end[1]};
    out.note = r.note;

    switch (r.reason) {
        case StopReason::Horizon: out.kind = OutcomeKind::ReachedHorizon; break;
        case StopReason::Callback:
            out.kind = trigger_quench ? OutcomeKind::Quench : OutcomeKind::Blowup;
            break;
        case StopReason::StepTooSmall:
        case StopReason::RhsFailure: out.kind = OutcomeKind::StepFailure; break;
    }

    // Post-run singular analysis per component over the last accepted steps.
    if (out.kind == OutcomeKind::Quench || out.kind == OutcomeKind::Blowup) {
        const std::size_t n = out.step_t.size();
        const std::size_t win = std::min<std::size_t>(n, 20);
        const std::size_t lo = n - win;
        for (int comp = 0; comp < 2; ++comp) {
            const std::optional<double>& target = comp == 0 ? p.target_w : p.target_z;
            const double d0 = comp == 0 ? d0_w : d0_z;
            const double y_last = out.y_end[static_cast<std::size_t>(comp)];
            const double y_init = comp == 0 ? p.c1 : p.c2;
            std::vector<double> ts, ds;
            bool to_target = false;
            double tgt = 0.0;
            if (target && d0 > 0.0 && std::fabs(y_last - *target) <= 1e-3 * d0) {
                to_target = true;
                tgt = *target;
                for (std::size_t i = lo; i < n; ++i) {
                    ts.push_back(out.step_t[i]);
                    ds.push_back(std::fabs(out.step_y[i][static_cast<std::size_t>(comp)] - tgt));
                }
            } else if (std::fabs(y_last) >= 1e3 * std::max(1.0, std::fabs(y_init))) {
                for (std::size_t i = lo; i < n; ++i) {
                    ts.push_back(out.step_t[i]);
                    const double v = std::fabs(out.step_y[i][static_cast<std::size_t>(comp)]);
                    ds.push_back(v > 0.0 ? 1.0 / v : 0.0);
                }
            } else {
                continue;
            }
            SingularFit fit = fit_singular_time(ts, ds);
            if (!fit.valid) continue;
            ComponentEvent ev;
            ev.component = comp;
            ev.to_target = to_target;
            ev.target = tgt;
            ev.fit = fit;
            out.component_events.push_back(ev);
            if (comp == trigger_comp) {
                out.T_hat = fit.T_hat;
                out.T_hat_uncertainty = fit.uncertainty;
                out.gamma = fit.gamma;
                out.low_confidence = fit.low_confidence;
            }
        }
        if (out.component_events.empty()) out.note += "; singular fit unavailable";
    }
    return out;
}

namespace {

SubsolutionReport check_candidate(const OdeProblem& p,
                                  const std::function<double(double)>& wbar,
                                  const std::function<double(double)>& zbar,
                                  const std::vector<double>& t_grid) {
    BoundSystem sys(p.f, p.g, p.constants);
    SubsolutionReport rep;
    rep.t_grid = t_grid;
    for (double t : t_grid) {
        const double h = 1e-6 * std::max(1.0, std::fabs(t));
        const double w = wbar(t), z = zbar(t);
        const double dw = (wbar(t + h) - wbar(t - h)) / (2.0 * h);
        const double dz = (zbar(t + h) - zbar(t - h)) / (2.0 * h);
        const double vw = dw - sys.eval_f(w, z);
        const double vz = dz - sys.eval_g(w, z);
        rep.violation_w.push_back(vw);
        rep.violation_z.push_back(vz);
        rep.max_violation = std::max({rep.max_violation, vw, vz});
    }
    return rep;
}

}  // namespace

SubsolutionReport check_subsolution_family(const OdeProblem& p, const RationalBlowupFamily& fam,
                                           const std::vector<double>& t_grid) {
    const double c = std::min(fam.A * fam.M * fam.N - fam.B * std::pow(fam.M, fam.p - 1.0),
                              fam.C * fam.M * fam.N - fam.D * std::pow(fam.N, fam.q - 1.0));
    auto wbar = [&](double t) { return fam.M / (1.0 - c * t); };
    auto zbar = [&](double t) { return fam.N / (1.0 - c * t); };
    SubsolutionReport rep = check_candidate(p, wbar, zbar, t_grid);
    rep.c = c;
    rep.side_conditions_ok =
        fam.A * fam.M * fam.M * fam.N > fam.B * std::pow(fam.M, fam.p) &&
        fam.C * fam.M * fam.N * fam.N > fam.D * std::pow(fam.N, fam.q);
    return rep;
}

SubsolutionReport check_subsolution_custom(const OdeProblem& p, const Expr& w_of_t,
                                           const Expr& z_of_t, const std::vector<double>& t_grid) {
    auto make = [&](const Expr& e) {
        return [&e, &p](double t) {
            std::map<std::string, double> b = p.constants;
            b["t"] = t;
            return e.eval(b);
        };
    };
    SubsolutionReport rep = check_candidate(p, make(w_of_t), make(z_of_t), t_grid);
    rep.side_conditions_ok = true;
    return rep;
}

ProductSeries product_monitor(const OdeOutcome& outcome, double alpha, double beta) {
    ProductSeries s;
    s.t = outcome.sample_t;
    bool first = true;
    for (std::size_t i = 0; i < outcome.sample_t.size(); ++i) {
        const double w = outcome.sample_y[i][0];
        const double z = outcome.sample_y[i][1];
        if (alpha != 0.0 && w <= 0.0)
            throw EvalError(EvalErrorKind::LogNonPositive, -1,
                            "product monitor requires w > 0 at samples");
        if (beta != 0.0 && z <= 0.0)
            throw EvalError(EvalErrorKind::LogNonPositive, -1,
                            "product monitor requires z > 0 at samples");
        const double v = std::pow(w, alpha) * std::pow(z, beta);
        s.value.push_back(v);
        if (first) {
            s.max_value = s.min_value = v;
            first = false;
        } else {
            s.max_value = std::max(s.max_value, v);
            s.min_value = std::min(s.min_value, v);
        }
    }
    return s;
}

void write_trajectory_csv(const OdeOutcome& outcome, const std::string& path,
                          const std::vector<ProductSeries>& monitors,
                          const std::vector<std::string>& monitor_names) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "t,w,z,dt";
    for (std::size_t m = 0; m < monitors.size(); ++m)
        f << ',' << (m < monitor_names.size() ? monitor_names[m] : "monitor" + std::to_string(m));
    f << '\n';
    char buf[512];
    // dt column: size of the accepted step active at/before each sample time
    std::size_t si = 0;
    for (std::size_t i = 0; i < outcome.sample_t.size(); ++i) {
        const double t = outcome.sample_t[i];
        while (si + 1 < outcome.step_t.size() && outcome.step_t[si] < t) ++si;
        const double dt = outcome.step_h.empty() ? 0.0 : outcome.step_h[si];
        int len = std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", t,
                                outcome.sample_y[i][0], outcome.sample_y[i][1], dt);
        f.write(buf, len);
        for (const auto& m : monitors) {
            len = std::snprintf(buf, sizeof(buf), ",%.17g", i < m.value.size() ? m.value[i] : 0.0);
            f.write(buf, len);
        }
        f << '\n';
    }
}

}  // namespace rds
