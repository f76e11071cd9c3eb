#include "regul/forwarding.hpp"

#include <cmath>

namespace regul {

Vec integrator_rhs(const IntegralAction& ia, const Vec& x_or_xhat, const Vec& yr, const Vec& z,
                   double xbar) {
    Vec x_used = x_or_xhat;
    if (std::isfinite(xbar) && xbar > 0.0) {
        SmoothSaturation sx(xbar, ia.varsigma);
        x_used = sx(x_or_xhat);
    }
    Vec rhs = ia.k(x_used, yr);
    if (ia.H_windup && ia.omega > 0.0) {
        SmoothSaturation sz(ia.zbar, ia.varsigma);
        const Vec arg = z + ia.H_windup(x_used);
        rhs += ia.omega * (sz(arg) - arg);
    }
    return rhs;
}

std::function<Vec(const Vec&, const Vec&)> default_coupling(double gain) {
    if (!(gain > 0.0)) throw std::invalid_argument("default_coupling: gain must be > 0");
    return [gain](const Vec&, const Vec& v) {
        Vec out(v.size());
        for (int i = 0; i < v.size(); ++i) out[i] = gain * std::tanh(v[i]);
        return out;
    };
}

namespace {

Mat h_jacobian_of(const ForwardingDesign& design, const Vec& x) {
    if (design.H_jacobian) return design.H_jacobian(x);
    return numerical_jacobian(design.H, x);
}

Vec grad_v_of(const ForwardingDesign& design, const Vec& x) {
    if (design.grad_V) return design.grad_V(x);
    return numerical_gradient(design.V, x);
}

int coupling_dim(const ForwardingDesign& design, const ControlAffineModel& model) {
    switch (design.variant) {
        case ForwardingVariant::a:
        case ForwardingVariant::c_teel:
            return model.m;
        case ForwardingVariant::b:
        case ForwardingVariant::c:
            return design.r;
    }
    return model.m;
}

}  // namespace

void probe_design(const ForwardingDesign& design, const ControlAffineModel& model, int n_probes,
                  std::uint64_t seed) {
    if (!design.beta) throw config_error("forwarding: beta is required");
    if (!design.J) throw config_error("forwarding: coupling J is required");
    const Vec beta0 = design.beta(Vec::Zero(model.n));
    if (beta0.norm() > 1e-10) throw design_error("forwarding: beta(0) != 0");

    const int dim = coupling_dim(design, model);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n_probes; ++i) {
        Vec x(model.n), v(dim);
        for (int j = 0; j < model.n; ++j) x[j] = gauss(rng);
        for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
        if (v.norm() < 1e-9) continue;
        const double inner = v.dot(design.J(x, v));
        if (!(inner > 0.0))
            throw design_error("forwarding: v'J(x,v) > 0 violated at a probe point");
        const Mat slope = numerical_jacobian([&](const Vec& vv) { return design.J(x, vv); },
                                             Vec::Zero(dim));
        if (std::abs(slope.determinant()) < 1e-12)
            throw design_error("forwarding: dJ/dv(x,0) numerically singular");
    }
}

Vec psi(const ForwardingDesign& design, const ControlAffineModel& model, const Vec& x,
        const Vec& z) {
    if (!design.beta || !design.J) throw config_error("forwarding: beta and J are required");
    const Mat gx = model.g(x);

    switch (design.variant) {
        case ForwardingVariant::a: {
            if (!design.V || !design.H)
                throw config_error("forwarding variant a: V and H are required");
            const Vec gv = grad_v_of(design, x);             // n
            const Mat dh = h_jacobian_of(design, x);         // r x n
            const Vec lg_v = gx.transpose() * gv;            // m
            const Mat lg_h = dh * gx;                        // r x m
            const Vec arg = lg_v - lg_h.transpose() * (z - design.H(x));
            return design.beta(x) - design.J(x, arg);
        }
        case ForwardingVariant::b: {
            if (!design.H || !design.gamma_gain)
                throw config_error("forwarding variant b: H and gamma_gain are required");
            const Mat dh = h_jacobian_of(design, x);
            const Mat lg_h = dh * gx;                        // r x m
            return design.beta(x) +
                   design.gamma_gain(x) * lg_h.transpose() * design.J(x, z - design.H(x));
        }
        case ForwardingVariant::c: {
            if (design.H0.size() == 0 || !design.gamma_gain)
                throw config_error("forwarding variant c: H0 and gamma_gain are required");
            const Vec arg = z - design.H0 * x;
            return design.beta(x) +
                   design.gamma_gain(x) * gx.transpose() * design.H0.transpose() *
                       design.J(x, arg);
        }
        case ForwardingVariant::c_teel: {
            if (design.H0.size() == 0)
                throw config_error("forwarding variant c_teel: H0 is required");
            if (!(design.eps > 0.0))
                throw config_error("forwarding variant c_teel: eps must be > 0");
            const Mat g0 = model.g(Vec::Zero(model.n));
            const Vec arg = g0.transpose() * design.H0.transpose() * (z - design.H0 * x) /
                            design.eps;
            return design.beta(x) + design.eps * design.J(x, arg);
        }
    }
    throw config_error("forwarding: unknown variant");
}

Mat compute_H0(const ControlAffineModel& model, const IntegralAction& ia,
               const Mat& beta_jacobian) {
    const Vec zero_x = Vec::Zero(model.n);
    const Vec zero_yr = Vec::Zero(ia.r);

    const Mat dk_dyr = numerical_jacobian(
        [&](const Vec& yr) { return ia.k(zero_x, yr); }, zero_yr);       // r x r
    const Mat dhr_dx = numerical_jacobian(
        [&](const Vec& x) { return model.h_r(x); }, zero_x);             // r x n
    const Mat df_dx = numerical_jacobian(model.f, zero_x);               // n x n
    const Mat closed = df_dx + model.g(zero_x) * beta_jacobian;          // n x n

    // H0 = dk_dyr * dhr_dx * closed^{-1}, formed as a transposed solve.
    Mat closed_inv_t;
    try {
        closed_inv_t = invert_checked(Mat(closed.transpose()),
                                      "compute_H0 closed-loop linearization");
    } catch (const std::runtime_error&) {
        throw std::runtime_error(
            "compute_H0: closed-loop linearization df/dx(0) + g(0) dbeta/dx(0) is singular "
            "(stabilizer does not make the origin hyperbolic)");
    }
    return dk_dyr * dhr_dx * closed_inv_t.transpose();
}

double extended_lyapunov(const ForwardingDesign& design, const Vec& x, const Vec& z) {
    switch (design.variant) {
        case ForwardingVariant::a:
        case ForwardingVariant::b: {
            if (!design.V || !design.H)
                throw config_error("extended_lyapunov: V and H required for variants a/b");
            const Vec w = z - design.H(x);
            return design.V(x) + 0.5 * w.squaredNorm();
        }
        case ForwardingVariant::c:
        case ForwardingVariant::c_teel: {
            if (!design.V || design.H0.size() == 0)
                throw config_error("extended_lyapunov: V and H0 required for variants c");
            const Vec w = z - design.H0 * x;
            const double d_of_v =
                design.d_scale ? design.d_scale(design.V(x)) : design.V(x);
            return d_of_v + std::sqrt(1.0 + 0.5 * w.squaredNorm()) - 1.0;
        }
    }
    throw config_error("extended_lyapunov: unknown variant");
}

std::function<double(const Vec&)> make_proper(std::function<double(const Vec&)> V, double v_S) {
    if (!std::isfinite(v_S)) return V;
    if (!(v_S > 0.0)) throw std::invalid_argument("make_proper: v_S must be positive");
    return [V = std::move(V), v_S](const Vec& x) {
        const double v = V(x);
        if (v >= v_S)
            throw std::domain_error("make_proper: point outside the re-propered domain (V >= v_S)");
        return v / (v_S - v);
    };
}

double estimate_inf(const std::function<double(const Vec&)>& V, const Sampler& shell_sampler,
                    long n_samples, std::uint64_t seed) {
    if (n_samples <= 0) throw std::invalid_argument("estimate_inf: need samples");
    std::mt19937_64 rng(seed);
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i < n_samples; ++i) best = std::min(best, V(shell_sampler(rng)));
    return best;
}

DesignReport verify_design(const ForwardingDesign* design, const ControlAffineModel& model,
                           const IntegralAction& ia, const Sampler& state_sampler,
                           long n_samples, std::uint64_t seed) {
    DesignReport report;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vec zero_yr = Vec::Zero(ia.r);
    const int dim = (design && design->J) ? ia.r : 0;

    report.upsilon_min = std::numeric_limits<double>::infinity();
    const bool has_h = design && design->H &&
                       (design->variant == ForwardingVariant::a ||
                        design->variant == ForwardingVariant::b);

    for (long i = 0; i < n_samples; ++i) {
        const Vec x = state_sampler(rng);

        if (has_h) {
            const Mat dh = h_jacobian_of(*design, x);
            const Vec res = dh * model.eval(x, design->beta(x)) - ia.k(x, model.h_r(x));
            report.h_residual_max = std::max(report.h_residual_max, res.norm());
        }

        report.k_zero_max = std::max(report.k_zero_max, ia.k(x, zero_yr).norm());
        const Mat dk_dx =
            numerical_jacobian([&](const Vec& xx) { return ia.k(xx, zero_yr); }, x);
        report.k_slope_zero_max = std::max(report.k_slope_zero_max, dk_dx.norm());

        Vec ya(ia.r), yb(ia.r);
        for (int j = 0; j < ia.r; ++j) {
            ya[j] = gauss(rng);
            yb[j] = gauss(rng);
        }
        const double lhs = (ia.k(x, ya) - ia.k(x, yb)).norm();
        const double rhs = ia.lipschitz ? ia.lipschitz(x) * (ya - yb).norm() : lhs;
        report.lipschitz_excess = std::max(report.lipschitz_excess, lhs - rhs);

        if (dim > 0) {
            Vec v(dim);
            for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
            if (v.norm() > 1e-9)
                report.upsilon_min =
                    std::min(report.upsilon_min, v.dot(design->J(x, v)) / v.squaredNorm());
        }
    }
    report.ok = report.k_zero_max <= 1e-10 && report.k_slope_zero_max <= 1e-6 &&
                report.lipschitz_excess <= 1e-9 && report.upsilon_min > 0.0 &&
                (!has_h || report.h_residual_max <= 1e-6);
    return report;
}

}  // namespace regul
