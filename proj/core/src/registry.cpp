#include "regul/registry.hpp"

#include <cmath>

namespace regul {

ModelBundle make_aircraft_bundle(const aircraft::Params& raw, double omega, double zbar) {
    const aircraft::Params params = aircraft::Params::make(raw);
    ModelBundle bundle;
    bundle.name = "aircraft";
    bundle.model = aircraft::model(params);
    bundle.feedback = aircraft::state_feedback(params);
    bundle.ia = aircraft::integral_action(params, omega, zbar);
    bundle.chart = aircraft::chart(params);
    bundle.barrier = aircraft::barrier(params);
    bundle.process_family = [params](const std::string& family, double delta) {
        return aircraft::process(params, family, delta);
    };
    bundle.to_internal = [params](const Vec& x) { return aircraft::to_deviation(params, x); };
    bundle.from_internal = [params](const Vec& x) { return aircraft::from_deviation(params, x); };
    bundle.state_names = {"v", "gamma", "theta"};

    // Sampler over the stability region (phugoid sublevel set) times an
    // integrator box, in deviation coordinates. The box brackets the
    // protected-set faces (so the escape level is seen) while keeping a
    // usable hit rate inside the sized sublevel set.
    const double v0 = params.v0;
    Vec lo(4), hi(4);
    lo << -0.35 * v0, -0.6, -0.7, -800.0;
    hi << 0.35 * v0, 0.6, 0.7, 800.0;
    BoxSampler box{lo, hi};
    bundle.xz_sampler = [box, params](std::mt19937_64& rng) {
        for (int tries = 0; tries < 256; ++tries) {
            Vec xz = box(rng);
            const double v = xz[0] + params.v0;
            if (v <= 1.0) continue;
            if (aircraft::phugoid_invariant(params, v, xz[1]) < 0.0) return xz;
        }
        Vec xz = Vec::Zero(4);
        return xz;
    };
    bundle.outside_protected = [params](const Vec& xd) {
        return aircraft::h2(params, aircraft::from_deviation(params, xd)) > 0.0;
    };
    bundle.in_compact = [params](const ClosedLoopState& s) {
        const Vec x = aircraft::from_deviation(params, s.x);
        return x[0] > 40.0 && x[0] < 360.0 && std::abs(x[1]) < 1.3 && std::abs(x[2]) < 1.5 &&
               s.z.cwiseAbs().maxCoeff() < 2.0e4;
    };
    Vec init(3);
    init << 1.05 * v0, 0.1, params.theta_star() + 0.05;
    bundle.default_initial = init;
    return bundle;
}

ModelBundle make_double_integrator_bundle(ForwardingVariant variant) {
    ModelBundle bundle;
    bundle.name = "double-integrator";

    auto f = [](const Vec& x) {
        Vec dx(2);
        dx[0] = x[1];
        dx[1] = 0.0;
        return dx;
    };
    auto g = [](const Vec&) {
        Mat gm = Mat::Zero(2, 1);
        gm(1, 0) = 1.0;
        return gm;
    };
    auto h = [](const Vec& x) { return x; };
    bundle.model = ControlAffineModel::create(2, 1, 2, f, g, h, {0});

    // Pole placement at -1, -1 plus a forwarding correction on the
    // integrator channel (the cross term enters through its linearization,
    // either scaled by gamma_gain or through the small-signal saturated
    // form).
    if (variant != ForwardingVariant::c && variant != ForwardingVariant::c_teel)
        throw config_error(
            "double-integrator: only the linearized cross-term variants are available "
            "(no closed-form H for the full forwarding forms)");
    ForwardingDesign design;
    design.variant = variant;
    design.eps = 0.5;
    design.r = 1;
    design.beta = [](const Vec& x) {
        Vec u(1);
        u[0] = -(x[0] + 2.0 * x[1]);
        return u;
    };
    Mat h0(1, 2);
    h0 << -2.0, -1.0;  // dk/dy_r * dh_r/dx * (closed loop)^{-1}
    design.H0 = h0;
    design.gamma_gain = [](const Vec&) { return 0.5; };
    design.J = default_coupling(1.0);
    Mat pv(2, 2);
    pv << 1.5, 0.5, 0.5, 0.5;  // Lyapunov matrix of the beta-closed loop
    design.V = [pv](const Vec& x) { return x.dot(pv * x); };
    design.d_scale = [](double s) { return 4.0 * s; };
    probe_design(design, bundle.model);
    bundle.design = design;
    bundle.feedback = feedback_from_forwarding(design, bundle.model);

    IntegralAction ia;
    ia.r = 1;
    ia.omega = 1.0;
    ia.zbar = 10.0;
    ia.k = [](const Vec&, const Vec& yr) { return yr; };
    ia.lipschitz = [](const Vec&) { return 1.0; };
    ia.H_windup = [h0](const Vec& x) { return Vec(h0 * x); };
    bundle.ia = ia;

    ObserverChart ch;
    ch.n = 2;
    ch.p = 2;
    ch.phi = [](const Vec& x) { return x; };
    ch.dphi = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
    ch.C = Mat::Identity(2, 2);
    Mat a = Mat::Zero(2, 2);
    a(0, 1) = 1.0;
    ch.A_of = [a](const Vec&) { return a; };
    Mat p(2, 2);
    p << 2.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3;
    ch.P = p;
    ch.nu = 0.25;
    const Mat k_mat = 2.0 * invert_checked(p);
    ch.K_of = [k_mat](const Vec&) { return k_mat; };
    ch.L_of = [](double ell) {
        Mat l = Mat::Identity(2, 2);
        l(1, 1) = ell;
        return l;
    };
    ch.M_of = [](double ell) { return Mat(ell * Mat::Identity(2, 2)); };
    ch.N_of = [](double ell) {
        Mat n = Mat::Identity(2, 2);
        n(1, 1) = 1.0 / ell;
        return n;
    };
    ch.in_domain = [](const Vec&) { return true; };
    bundle.chart = ch;

    bundle.process_family = [model = bundle.model](const std::string& family, double delta) {
        if (family == "output-bias") {
            auto xi = [model](const Vec& x, const Vec& u) { return model.eval(x, u); };
            auto zeta = [model, delta](const Vec& x, const Vec&) {
                Vec y = model.h(x);
                y[0] += delta;
                return y;
            };
            return ProcessModel::create(std::move(xi), std::move(zeta), model);
        }
        if (family == "drift") {
            auto xi = [model, delta](const Vec& x, const Vec& u) {
                Vec dx = model.eval(x, u);
                dx[1] += delta;
                return dx;
            };
            auto zeta = [model](const Vec& x, const Vec&) { return model.h(x); };
            return ProcessModel::create(std::move(xi), std::move(zeta), model);
        }
        throw config_error("double-integrator: unknown perturbation family '" + family + "'");
    };

    bundle.to_internal = [](const Vec& x) { return x; };
    bundle.from_internal = [](const Vec& x) { return x; };
    bundle.state_names = {"x0", "x1"};
    Vec lo(3), hi(3);
    lo << -5.0, -5.0, -20.0;
    hi << 5.0, 5.0, 20.0;
    bundle.xz_sampler = make_box_sampler(lo, hi);
    bundle.outside_protected = [](const Vec&) { return false; };  // unconstrained domain
    bundle.in_compact = [](const ClosedLoopState& s) {
        return s.x.cwiseAbs().maxCoeff() < 100.0 && s.z.cwiseAbs().maxCoeff() < 100.0;
    };
    Vec init(2);
    init << 1.0, 0.0;
    bundle.default_initial = init;
    return bundle;
}

ModelBundle make_bundle(const std::string& name) {
    if (name == "aircraft") return make_aircraft_bundle(aircraft::Params::make());
    if (name == "double-integrator") return make_double_integrator_bundle();
    throw config_error("unknown model '" + name + "'");
}

std::vector<std::string> registered_models() { return {"aircraft", "double-integrator"}; }

}  // namespace regul
