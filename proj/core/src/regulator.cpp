#include "regul/regulator.hpp"

namespace regul {

StateFeedback feedback_from_forwarding(const ForwardingDesign& design,
                                       const ControlAffineModel& model) {
    StateFeedback fb;
    fb.psi = [design, model](const Vec& x, const Vec& z) { return psi(design, model, x, z); };
    fb.Ve = [design](const Vec& x, const Vec& z) { return extended_lyapunov(design, x, z); };
    return fb;
}

LevelSetEstimate estimate_level_sets(const StateFeedback& feedback,
                                     const std::function<bool(const Vec&)>& outside_protected,
                                     const Sampler& xz_sampler, int n,
                                     const LevelSetOptions& opts) {
    LevelSetEstimate levels;
    levels.varsigma = opts.varsigma;
    std::mt19937_64 rng(opts.seed);

    std::vector<Vec> xs, zs;
    std::vector<double> ve;
    xs.reserve(opts.n_samples);
    for (long i = 0; i < opts.n_samples; ++i) {
        const Vec xz = xz_sampler(rng);
        Vec x = xz.head(n);
        Vec z = xz.tail(xz.size() - n);
        double v;
        try {
            v = feedback.Ve(x, z);
        } catch (const std::domain_error&) {
            continue;  // sampler strayed outside the Lyapunov domain
        }
        if (!std::isfinite(v)) continue;
        if (outside_protected && outside_protected(x)) {
            levels.v_infty = std::min(levels.v_infty, v);
            ++levels.outside_samples;
        }
        xs.push_back(std::move(x));
        zs.push_back(std::move(z));
        ve.push_back(v);
        ++levels.sample_count;
    }

    if (!std::isfinite(levels.v_infty)) {
        levels.coverage_warning = true;
        if (opts.v2_override) {
            levels.v2 = *opts.v2_override;
            levels.v1 = opts.v1_fraction / opts.v2_fraction * levels.v2;
        } else {
            throw config_error(
                "estimate_level_sets: no samples outside the protected region and no v2 "
                "override supplied (v_infty = +infinity)");
        }
    } else {
        levels.v1 = opts.v1_fraction * levels.v_infty;
        levels.v2 = opts.v2_fraction * levels.v_infty;
    }

    double max_psi = 0.0, max_x = 0.0;
    long inside = 0;
    for (std::size_t i = 0; i < ve.size(); ++i) {
        if (ve[i] > levels.v2) continue;
        ++inside;
        max_psi = std::max(max_psi, feedback.psi(xs[i], zs[i]).norm());
        max_x = std::max(max_x, xs[i].norm());
    }
    if (inside == 0)
        throw config_error(
            "estimate_level_sets: no samples landed inside the v2 sublevel set; tighten the "
            "sampler or supply explicit levels");
    levels.mu = (1.0 + opts.varsigma) * max_psi;
    levels.xbar = (1.0 + opts.varsigma) * max_x;
    return levels;
}

Vec psi_sat(const StateFeedback& feedback, const LevelSetEstimate& levels, const Vec& xhat,
            const Vec& z) {
    const Vec raw = feedback.psi(xhat, z);
    if (!(levels.mu > 0.0)) return raw;
    SmoothSaturation sat(levels.mu, levels.varsigma);
    return sat(raw);
}

Vec ClosedLoopState::pack() const {
    Vec out(x.size() + z.size() + xhat.size());
    out << x, z, xhat;
    return out;
}

ClosedLoopState ClosedLoopState::unpack(const Vec& stacked, int n, int r, bool has_observer) {
    ClosedLoopState s;
    s.x = stacked.head(n);
    s.z = stacked.segment(n, r);
    s.xhat = has_observer ? stacked.tail(n) : s.x;
    return s;
}

Vec ClosedLoop::control(const ClosedLoopState& s) const {
    return psi_sat(feedback, levels, s.xhat, s.z);
}

Vec ClosedLoop::measured_output(const Vec& x, const Vec& u) const {
    return process ? process->zeta(x, u) : model.h(x);
}

Vec ClosedLoop::regulated_output(const Vec& x, const Vec& u) const {
    return process ? process->zeta_r(x, u) : model.h_r(x);
}

Vec ClosedLoop::rhs(const Vec& stacked) const {
    const ClosedLoopState s = ClosedLoopState::unpack(stacked, n(), r(), has_observer());
    const Vec u = control(s);
    const Vec y = measured_output(s.x, u);
    const Vec yr = regulated_output(s.x, u);

    const Vec xdot = process ? process->xi(s.x, u) : model.eval(s.x, u);
    const Vec zdot = integrator_rhs(ia, s.xhat, yr, s.z, levels.xbar);

    Vec out(dim());
    if (has_observer()) {
        const BarrierOutput* bar = barrier ? &*barrier : nullptr;
        const Vec xhatdot =
            observer_rhs(*chart, model, s.xhat, y, u, ell, bar, tau_margin);
        out << xdot, zdot, xhatdot;
    } else {
        out << xdot, zdot;
    }
    return out;
}

Rhs ClosedLoop::as_rhs() const {
    return [self = *this](double, const Vec& stacked) { return self.rhs(stacked); };
}

Probe ClosedLoop::probe() const {
    return [self = *this](double, const Vec& stacked) {
        const ClosedLoopState s =
            ClosedLoopState::unpack(stacked, self.n(), self.r(), self.has_observer());
        StepDiagnostics d;
        d.u = self.control(s);
        d.y = self.measured_output(s.x, d.u);
        d.yr = self.regulated_output(s.x, d.u);
        if (self.feedback.Ve) {
            try {
                d.Ve = self.feedback.Ve(s.x, s.z);
            } catch (const std::domain_error&) {
            }
        }
        if (self.has_observer()) {
            try {
                d.Ul = observer_lyapunov(*self.chart, s.x, s.xhat, self.ell);
            } catch (const std::exception&) {
            }
            if (self.barrier) d.h2hat = self.barrier->value(s.xhat);
        }
        const Vec raw = self.feedback.psi(s.xhat, s.z);
        d.sat_active = (raw - d.u).norm() > 1e-12 * (1.0 + raw.norm());
        return d;
    };
}

}  // namespace regul
