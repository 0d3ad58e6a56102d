#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rds/expr.hpp"
#include "rds/quadrature.hpp"

namespace rds {

// w_t = f1(z)*g1(w), z_t = f2(z)*g2(w), w(0)=c1, z(0)=c2.
// c3 <= c1 and c4 <= c2 are the antiderivative base points.
struct SeparableSystem {
    Expr f1, g1, f2, g2;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
    std::map<std::string, double> constants;
};

struct EpsK {
    double epsilon = 0.5;  // in (0,1)
    double K = 2.0;        // > 1
};

enum class VerdictKind { Global, BlowupLargeData, BlowupAllPositive, Quench, Inconclusive };

const char* to_string(VerdictKind k);

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct Verdict {
    VerdictKind kind = VerdictKind::Inconclusive;
    std::vector<TailReport> evidence;
    std::vector<HypothesisCheck> checks;
    double epsilon = 0.0, K = 0.0;
    std::string probed_box;
    std::string notes;
    bool internal_inconsistency = false;
};

struct HypothesisViolation : std::runtime_error {
    HypothesisViolation(const std::string& what_, double w_, double z_)
        : std::runtime_error(what_), w(w_), z(z_) {}
    double w = 0.0, z = 0.0;  // witness point
};

struct CriteriaOptions {
    double box_span = 1e6;  // hypotheses probed on [base, base+span], log-spaced offsets
    int box_samples = 512;
    int product_samples = 96;  // per axis for two-variable boxes
    TailOptions tail;
    double quad_rel_tol = 1e-10;
    double tol_inv = 1e-10;
    bool probe_hypotheses = true;
};

// Wrap a one-variable expression (plus named constants) as a callable.
std::function<double(double)> single_var_fn(const Expr& e, const std::string& var,
                                            const std::map<std::string, double>& constants = {});

// Theorem-A fast path: convergence of either of the integrals
// int^inf dw/g1(w), int^inf dz/f2(z) forces blowup for positive data.
Verdict fast_blowup_check(const SeparableSystem& sys, const CriteriaOptions& opts = {});

// Reduction of the separable system to the cross-coupled normal form
// W_t = f~(Z), Z_t = g~(W) with W(0)=Z(0)=0.
struct TransformedSystem {
    std::function<double(double)> f, g;
    double c1t = 0.0, c2t = 0.0;
    std::shared_ptr<Antiderivative> inv_g1_int;  // antiderivative of 1/g1 from c1
    std::shared_ptr<Antiderivative> inv_f2_int;  // antiderivative of 1/f2 from c2
};

TransformedSystem transform_separable(const SeparableSystem& sys, const CriteriaOptions& opts = {});

// Classification of w_t = f(z), z_t = g(w) by the four criterion integrals.
Verdict classify_fg(const std::function<double(double)>& f, const std::function<double(double)>& g,
                    double c1, double c2, double c3, double c4,
                    std::optional<EpsK> epsk = std::nullopt, const CriteriaOptions& opts = {});

// Orchestration: fast check, then transform + classify.
Verdict classify_separable(const SeparableSystem& sys, std::optional<EpsK> epsk = std::nullopt,
                           const CriteriaOptions& opts = {});

enum class EnvelopeMode { Upper, Lower };

struct ProductProblem {
    Expr f, g;      // over {w, z}
    Expr h, l;      // auxiliary factors h(w), l(z)
    Expr envelope;  // H(s) (Upper) or L(s) (Lower), over {s}
    EnvelopeMode mode = EnvelopeMode::Upper;
    double w_lo = 1.0, w_hi = 1e3, z_lo = 1.0, z_hi = 1e3;
    bool log_spaced = true;
    std::vector<Expr> region;  // optional constraints (expression >= 0 keeps the sample)
    std::map<std::string, double> constants;
};

Verdict classify_product(const ProductProblem& prob, const CriteriaOptions& opts = {});

enum class QuenchDirection { Down, Up };

struct QuenchProblem {
    Expr f, g;  // over {w, z}
    double w_edge = 0.0, z_edge = 0.0;    // singular levels approached
    double w_start = 1.0, z_start = 1.0;  // initial data / far corner of the box
    QuenchDirection direction = QuenchDirection::Down;
    std::map<std::string, double> constants;
};

Verdict classify_quench(const QuenchProblem& prob, const CriteriaOptions& opts = {});

}  // namespace rds
