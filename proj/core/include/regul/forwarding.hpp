#pragma once

#include <functional>
#include <optional>

#include "regul/model.hpp"
#include "regul/saturation.hpp"

namespace regul {

/// Integral-action data: the map k driving dz/dt = k(x, y_r),
/// its Lipschitz envelope in y_r, and the anti-windup leak parameters.
/// k(x, y_r) = 0 must hold exactly when y_r = 0.
struct IntegralAction {
    int r = 1;
    std::function<Vec(const Vec& x, const Vec& yr)> k;
    std::function<double(const Vec& x)> lipschitz;     // L_k
    double omega = 1.0;                                // anti-windup gain
    double zbar = 1.0;                                 // anti-windup level
    double varsigma = 0.05;                            // saturation margin
    std::function<Vec(const Vec& x)> H_windup;         // H(x) (or H0 x) for the leak
};

/// dz/dt = k(sat_xbar(x), y_r) + omega [sat_zbar(z + H(x)) - (z + H(x))].
/// The leak term vanishes identically on |z + H(x)| <= zbar/(1+varsigma).
/// Pass xbar = +infinity to skip the state saturation.
Vec integrator_rhs(const IntegralAction& ia, const Vec& x_or_xhat, const Vec& yr, const Vec& z,
                   double xbar);

enum class ForwardingVariant { a, b, c, c_teel };

/// Forwarding stabilizer for the cascade (x, z). Which fields must be set
/// depends on the variant:
///   a      — V and H (Lyapunov function and cross term both known)
///   b      — H and gamma_gain (V unknown)
///   c      — H0 and gamma_gain (H approximated by its linearization)
///   c_teel — H0 and eps (small-input saturated form)
/// J must satisfy v' J(x,v) > 0 for v != 0 with nonsingular dJ/dv(x,0);
/// both are probed at construction.
struct ForwardingDesign {
    ForwardingVariant variant = ForwardingVariant::a;
    std::function<Vec(const Vec&)> beta;               // stabilizer, beta(0) = 0
    std::function<double(const Vec&)> V;               // variant a
    std::function<Vec(const Vec&)> grad_V;             // optional analytic gradient
    std::function<Vec(const Vec&)> H;                  // variants a, b
    std::function<Mat(const Vec&)> H_jacobian;         // optional analytic dH/dx
    Mat H0;                                            // variants c, c_teel (r x n)
    std::function<Vec(const Vec&, const Vec&)> J;
    std::function<double(const Vec&)> gamma_gain;      // variants b, c
    double eps = 1.0;                                  // variant c_teel
    std::function<double(double)> d_scale;             // variant c Lyapunov reparametrization
    int r = 1;
};

/// Bounded coupling term J(x, v) = gain * tanh(v) componentwise; satisfies
/// the positivity and nonsingular-slope probes for any gain > 0.
std::function<Vec(const Vec&, const Vec&)> default_coupling(double gain = 1.0);

/// Probes beta(0) = 0, v' J(x,v) > 0 on random nonzero v, and
/// det dJ/dv(x,0) != 0 at sampled states. Throws design_error on failure.
void probe_design(const ForwardingDesign& design, const ControlAffineModel& model,
                  int n_probes = 32, std::uint64_t seed = 7);

/// The forwarding state feedback psi(x, z) for the configured variant.
/// psi(0, 0) = 0 in all variants.
Vec psi(const ForwardingDesign& design, const ControlAffineModel& model, const Vec& x,
        const Vec& z);

/// H0 = dk/dy_r(0,0) dh_r/dx(0) [df/dx(0) + g(0) dbeta/dx(0)]^{-1}.
/// Throws if the closed-loop linearization is singular.
Mat compute_H0(const ControlAffineModel& model, const IntegralAction& ia,
               const Mat& beta_jacobian);

/// Extended Lyapunov function on (x, z):
///   a, b   — V(x) + 1/2 |z - H(x)|^2
///   c, c_teel — d(V(x)) + sqrt(1 + 1/2 |z - H0 x|^2) - 1
double extended_lyapunov(const ForwardingDesign& design, const Vec& x, const Vec& z);

/// Properness repair: on {V < v_S} returns x -> V(x)/(v_S - V(x)); the
/// identity transformation when v_S is infinite. Evaluation at V(x) >= v_S
/// is a domain error.
std::function<double(const Vec&)> make_proper(std::function<double(const Vec&)> V, double v_S);

/// Sampled infimum of V over a user-declared complement shell (used to
/// estimate v_S for make_proper).
double estimate_inf(const std::function<double(const Vec&)>& V, const Sampler& shell_sampler,
                    long n_samples, std::uint64_t seed);

/// Residual checks emitted as the design report: the cross-term equation
/// residual |dH/dx (f + g beta) - k(x, h_r(x))| on samples, the positivity
/// probe margin for J, and the integral-action conditions (k(x,0) = 0,
/// dk/dx(x,0) = 0, Lipschitz envelope). A null design checks the integral
/// action only (hand-built feedbacks have no forwarding data to verify).
struct DesignReport {
    double h_residual_max = 0.0;      // variants a/b only
    double upsilon_min = 0.0;         // min of v'J(x,v)/|v|^2 over probes
    double k_zero_max = 0.0;          // max |k(x, 0)|
    double k_slope_zero_max = 0.0;    // max |dk/dx(x, 0)|
    double lipschitz_excess = 0.0;    // max(|k(x,a)-k(x,b)| - L_k(x)|a-b|)
    bool ok = false;
};

DesignReport verify_design(const ForwardingDesign* design, const ControlAffineModel& model,
                           const IntegralAction& ia, const Sampler& state_sampler,
                           long n_samples, std::uint64_t seed);

}  // namespace regul
