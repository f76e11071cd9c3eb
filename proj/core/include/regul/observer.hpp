#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "regul/model.hpp"
#include "regul/simulate.hpp"

namespace regul {

/// High-gain observer data in original coordinates: a diffeomorphism phi
/// on the observability region O, matrices C, A(u), K(u), P and the gain
/// scalings L(ell), M(ell), N(ell). The observer itself never inverts phi,
/// only its Jacobian.
struct ObserverChart {
    int n = 0, p = 0;
    std::function<Vec(const Vec&)> phi;
    std::function<Mat(const Vec&)> dphi;          // n x n Jacobian of phi
    Mat C;                                        // p x n
    std::function<Mat(const Vec&)> A_of;          // u -> n x n
    std::function<Mat(const Vec&)> K_of;          // u -> n x p
    Mat P;                                        // symmetric positive definite
    double nu = 0.0;                              // contraction margin
    std::function<Mat(double)> L_of;              // ell -> n x n
    std::function<Mat(double)> M_of;              // ell -> n x n
    std::function<Mat(double)> N_of;              // ell -> p x p
    std::function<bool(const Vec&)> in_domain;    // membership in O
    double cond_warn_threshold = 1e10;
};

/// Dummy-output barrier: value >= 0, zero on the protected operating set
/// O_mod, with sublevel sets convex in phi-coordinates.
struct BarrierOutput {
    std::function<double(const Vec&)> value;      // h2
    std::function<Vec(const Vec&)> gradient;      // n components
    double activation = 0.0;                      // h2 == 0 region indicator helper
    bool inside_protected(const Vec& x) const { return value(x) <= 0.0; }
};

struct ObserverState {
    Vec xhat;
    double ell = 1.0;
    double last_correction_norm = 0.0;
};

struct ObserverDiagnostics {
    double dphi_condition = 0.0;
    bool ill_conditioned = false;
    double correction_norm = 0.0;
    double tau = 0.0;
};

/// B(phi(x), u) = L_f phi(x) + L_g phi(x) u - A(u) phi(x): the part of the
/// transformed dynamics not captured by the linear skeleton A(u).
Vec transform_B(const ObserverChart& chart, const ControlAffineModel& model, const Vec& x,
                const Vec& u);

/// dxhat/dt = f(xhat) + g(xhat) u + dphi(xhat)^{-1} L M K(u) N (y - h(xhat))
/// plus, when a barrier is supplied, the correction
///   E = -tau * dphi^{-1} L M P^{-1} L' dphi^{-T} grad_h2' * h2(xhat),
/// with tau = max(tau_floor, 0) + tau_margin computed online. E vanishes
/// identically where h2 = 0.
Vec observer_rhs(const ObserverChart& chart, const ControlAffineModel& model, const Vec& xhat,
                 const Vec& y, const Vec& u, double ell,
                 const BarrierOutput* barrier = nullptr, double tau_margin = 1.0,
                 ObserverDiagnostics* diag = nullptr);

/// On-line lower bound for the correction gain (quadratic in h2, so it
/// vanishes continuously at the activation boundary).
double tau_floor(const ObserverChart& chart, const ControlAffineModel& model,
                 const BarrierOutput& barrier, const Vec& xhat, const Vec& u, const Vec& y,
                 double ell);

/// U_ell(x, xhat) = 1/2 (phi - phihat)' [L M P^{-1} L']^{-1} (phi - phihat).
double observer_lyapunov(const ObserverChart& chart, const Vec& x, const Vec& xhat, double ell);

/// Chart verification report: identities, inequalities, and the Lipschitz
/// ratio estimate per gain-ladder rung. Failures are entries, not throws.
struct ChartCheck {
    std::string item;
    bool pass = false;
    double margin = 0.0;
    std::string detail;
};

struct ChartReport {
    std::vector<ChartCheck> items;
    std::vector<double> ladder;
    std::vector<double> c_ell;     // sampled Lipschitz ratio per rung
    int suggested_d = -1;          // smallest integer satisfying both O5 bounds
    bool all_pass = false;
    std::string to_json_string() const;
};

ChartReport verify_chart(const ObserverChart& chart, const ControlAffineModel& model,
                         const std::vector<double>& gain_ladder, const Sampler& state_sampler,
                         const Sampler& input_sampler, long n_samples, std::uint64_t seed);

/// Quadratic barrier h2(x) = max{phi(x)'Q phi(x)/varrho - eps, 0}^2: exact
/// convexity in phi-coordinates, C1 across the activation boundary.
BarrierOutput build_h2_quadratic(const ObserverChart& chart, const Mat& Q, double varrho,
                                 double eps);

/// Joint plant+observer simulation followed by a log-slope fit of U_ell.
/// `input` is the control signal applied to both; the plant starts at x0,
/// the observer at xhat0.
struct ContractionResult {
    bool converged_immediately = false;  // xhat0 == x0, nothing to fit
    double rate = 0.0;
    double r_squared = 0.0;
    Trace trace;  // stacked [x; xhat]
};

ContractionResult contraction_rate(const ObserverChart& chart, const ControlAffineModel& model,
                                   const std::function<Vec(double, const Vec&)>& input,
                                   const Vec& x0, const Vec& xhat0, double ell,
                                   const IntegratorConfig& config, double fit_start_fraction = 0.1,
                                   double floor = 1e-16);

}  // namespace regul
