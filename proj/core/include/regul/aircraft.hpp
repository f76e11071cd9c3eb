#pragma once

#include "regul/observer.hpp"
#include "regul/regulator.hpp"

namespace regul {
namespace aircraft {

/// Longitudinal fixed-wing model at high speed. Physical state (v, gamma,
/// theta): airspeed modulus, flight-path angle, pitch angle; inputs (e, q):
/// thrust and pitch rate; measured output (theta, gamma); regulated output
/// gamma. Valid for v > 0 only.
struct Params {
    double g = 9.81;            // gravitational acceleration [m/s^2]
    double pounds = 4.907e-3;   // lift coefficient [1/m]
    double v0 = 200.0;          // cruise speed [m/s]

    // feedback gains (dimensionless, > 0)
    double k1 = 2.0;
    double k2 = 0.5;
    double k3 = 20.0;
    double k4 = 2.0;
    double k_e = 5.0;   // thrust saturation level
    double k_q = 0.5;   // pitch-rate saturation level

    // barrier constants
    double eps1 = 0.25;
    double eps2 = 0.25;
    double eps3 = 0.0;            // defaults to pounds * v0
    double eps4 = 2.0;            // descent-rate face [rad/s]
    double eps5 = 0.8;
    double gamma_dot_max = 2.0;   // climb-rate cap [rad/s]
    // pitch/path gap face: keeps the estimate on the branch where the
    // chart Jacobian stays nonsingular (the gamma-rate map folds in v for
    // negative gaps). Active for theta - gamma <= delta_floor; reaches 1/2
    // one width further out. Sized to stay clear of nominal trajectories
    // and estimator transients (gap dips of about -0.011 rad).
    double delta_floor = -0.015;
    double delta_width = 0.015;
    // speed face: bounds the estimate's speed so the barrier sublevel set
    // is compact and the gap face suffices to exclude the chart fold.
    double v_cap = 230.0;
    double v_cap_width = 28.284271247461902;

    // removable-singularity switch half-width in the q law [rad]
    double sing_tol = 1e-4;

    // observer quadratic-stability data
    double nu = 0.5;
    double nu_k = 2.0;

    double varsigma = 0.05;

    /// Pitch trim angle: arcsin(g / (pounds * v0^2)).
    double theta_star() const;

    /// Fills the derived defaults and validates g/(pounds*v0^2) in (0,1)
    /// and positivity of every gain.
    static Params make();
    static Params make(Params p);
};

/// dx/dt for x = (v, gamma, theta), u = (e, q):
///   (e - g sin gamma, pounds v sin(theta-gamma) - g cos(gamma)/v, q).
/// Throws std::domain_error for v <= 0.
Vec dynamics(const Params& params, const Vec& x, const Vec& u);

/// Conserved quantity of the unforced phugoid exchange:
/// v^3/(3 v0^3) - (v/v0) cos gamma.
double phugoid_invariant(const Params& params, double v, double gamma);

/// The four-term control Lyapunov function on (z, v, gamma, theta);
/// zero exactly at (0, v0, 0, theta_star).
double lyapunov(const Params& params, double z, double v, double gamma, double theta);

/// The (e, q) feedback: e saturated at k_e inside the law, q saturated at
/// k_q for the output-feedback composition. The 0/0 ratio in the q law is
/// replaced by its limit inside |theta - gamma - theta_star| < sing_tol.
Vec feedback(const Params& params, double z, double v, double gamma, double theta);

/// gamma-rate map and its analytic partials with respect to (v, gamma, theta).
double gamma_dot(const Params& params, double v, double gamma, double theta);
Vec gamma_dot_gradient(const Params& params, double v, double gamma, double theta);

/// Barrier value/gradient in physical coordinates: squared hinges on
/// theta, gamma, the gamma-rate (both directions), and the pitch/path gap;
/// zero on the operating box, convex in chart coordinates.
double h2(const Params& params, const Vec& x_physical);
Vec h2_gradient(const Params& params, const Vec& x_physical);

/// Design-model coordinates are deviations from the trim point
/// (v0, 0, theta_star), so the model has its equilibrium at the origin.
Vec to_deviation(const Params& params, const Vec& x_physical);
Vec from_deviation(const Params& params, const Vec& x_deviation);

/// The registered design model (deviation coordinates), output
/// (theta - theta_star, gamma), regulated output gamma.
ControlAffineModel model(const Params& params);

/// Observer chart phi = (theta - theta_star, gamma, gamma_dot) with
/// L = diag(1,1,ell), M = ell I, N = I, K = nu_k P^{-1} C'. nu_k is raised
/// automatically until the quadratic-stability margin is nonnegative.
ObserverChart chart(const Params& params);

/// Membership in the phi-space set where the state can be recovered
/// unambiguously from (theta, gamma, gamma_dot).
bool xi_membership(const Params& params, const Vec& phi);

/// Barrier wrapper over h2 in deviation coordinates.
BarrierOutput barrier(const Params& params);

/// Integral action k(x, y_r) = v sin(y_r) with windup leak acting on
/// z + (v^2 - v0^2)/(2g), the combination the Lyapunov function penalizes.
IntegralAction integral_action(const Params& params, double omega, double zbar);

/// The hand-designed feedback/Lyapunov pair in deviation coordinates.
StateFeedback state_feedback(const Params& params);

/// Named perturbation families producing the true plant:
///   "lift-scale"    pounds -> (1+delta) pounds in the dynamics
///   "theta-bias"    measured theta output shifted by delta [rad]
///   "thrust-offset" dv/dt shifted by delta [m/s^2]
ProcessModel process(const Params& params, const std::string& family, double delta);

}  // namespace aircraft
}  // namespace regul
