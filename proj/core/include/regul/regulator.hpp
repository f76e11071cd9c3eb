#pragma once

#include <functional>
#include <optional>

#include "regul/forwarding.hpp"
#include "regul/observer.hpp"

namespace regul {

/// A state feedback for the extended (x, z) system together with its
/// Lyapunov function. Forwarding designs produce one; hand-built designs
/// (like the shipped aircraft law) provide their own.
struct StateFeedback {
    std::function<Vec(const Vec& x, const Vec& z)> psi;
    std::function<double(const Vec& x, const Vec& z)> Ve;
};

StateFeedback feedback_from_forwarding(const ForwardingDesign& design,
                                       const ControlAffineModel& model);

/// Saturation sizing data: the escape level v_infty of V_e outside the
/// protected region, the nested levels v1 < v2, and the input/state
/// saturation levels derived from the sampled sublevel set of v2.
struct LevelSetEstimate {
    double v_infty = std::numeric_limits<double>::infinity();
    double v1 = 0.0;
    double v2 = 0.0;
    double mu = 0.0;    // input saturation level
    double xbar = 0.0;  // state saturation level
    long sample_count = 0;
    long outside_samples = 0;  // samples found outside the protected region
    bool coverage_warning = false;
    double varsigma = 0.05;
};

struct LevelSetOptions {
    double v1_fraction = 0.5;
    double v2_fraction = 0.8;
    double varsigma = 0.05;
    long n_samples = 20000;
    std::uint64_t seed = 17;
    std::optional<double> v2_override;  // required if v_infty comes out infinite
};

/// Samples (x, z) pairs, estimates v_infty as the infimum of V_e over the
/// points whose x lies outside the protected set, and sizes mu and xbar as
/// (1 + varsigma) times the sampled maxima of |psi| and |x| over the
/// sampled sublevel set {V_e <= v2}. Sampled maxima are monotone
/// non-decreasing in the sample count.
LevelSetEstimate estimate_level_sets(const StateFeedback& feedback,
                                     const std::function<bool(const Vec&)>& outside_protected,
                                     const Sampler& xz_sampler, int n, const LevelSetOptions& opts);

/// sat_mu applied componentwise to psi(xhat, z).
Vec psi_sat(const StateFeedback& feedback, const LevelSetEstimate& levels, const Vec& xhat,
            const Vec& z);

/// Stacked closed-loop state (x, z, xhat) <-> flat vector layout.
struct ClosedLoopState {
    Vec x, z, xhat;
    Vec pack() const;
    static ClosedLoopState unpack(const Vec& stacked, int n, int r, bool has_observer);
};

/// The full output-feedback composition: plant (model or process), the
/// integrator with anti-windup, the saturated feedback driven by the
/// estimate, and the observer fed with the measured output.
struct ClosedLoop {
    ControlAffineModel model;
    std::optional<ProcessModel> process;  // absent: plant == model
    StateFeedback feedback;
    IntegralAction ia;
    LevelSetEstimate levels;
    std::optional<ObserverChart> chart;   // absent: state feedback (xhat == x)
    std::optional<BarrierOutput> barrier;
    double ell = 1.0;
    double tau_margin = 1.0;

    int n() const { return model.n; }
    int r() const { return ia.r; }
    bool has_observer() const { return chart.has_value(); }
    int dim() const { return has_observer() ? 2 * n() + r() : n() + r(); }

    Vec control(const ClosedLoopState& s) const;    // u = psi_sat(xhat, z)
    Vec measured_output(const Vec& x, const Vec& u) const;
    Vec regulated_output(const Vec& x, const Vec& u) const;

    Vec rhs(const Vec& stacked) const;
    Rhs as_rhs() const;
    Probe probe() const;
};

}  // namespace regul
