#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regul/aircraft.hpp"
#include "regul/forwarding.hpp"
#include "regul/simulate.hpp"

using namespace regul;

namespace {

// Scalar plant dx/dt = -x + u with regulated output x. The cross-term
// equation for H with beta = 0 solves in closed form: H(x) = -x.
ControlAffineModel scalar_model() {
    auto f = [](const Vec& x) { return Vec(-x); };
    auto g = [](const Vec&) { return Mat(Mat::Ones(1, 1)); };
    auto h = [](const Vec& x) { return x; };
    return ControlAffineModel::create(1, 1, 1, f, g, h, {0});
}

IntegralAction scalar_ia() {
    IntegralAction ia;
    ia.r = 1;
    ia.omega = 0.0;  // no leak in the textbook cascade
    ia.zbar = 10.0;
    ia.k = [](const Vec&, const Vec& yr) { return yr; };
    ia.lipschitz = [](const Vec&) { return 1.0; };
    ia.H_windup = [](const Vec& x) { return Vec(-x); };
    return ia;
}

ForwardingDesign scalar_design_a() {
    ForwardingDesign d;
    d.variant = ForwardingVariant::a;
    d.r = 1;
    d.beta = [](const Vec&) { return Vec(Vec::Zero(1)); };
    d.V = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
    d.H = [](const Vec& x) { return Vec(-x); };
    d.J = [](const Vec&, const Vec& v) { return v; };
    return d;
}

}  // namespace

TEST_CASE("integrator rhs vanishes when y_r = 0 and the leak is in its dead zone") {
    const auto params = aircraft::Params::make();
    auto ia = aircraft::integral_action(params, 5.0, 600.0);
    Vec xd = Vec::Zero(3);
    Vec z = Vec::Zero(1);
    const Vec out = integrator_rhs(ia, xd, Vec::Zero(1), z, 1e9);
    CHECK(out.norm() == 0.0);
}

TEST_CASE("aircraft integrator value matches v*sin(gamma) at (0.1, 200)") {
    const auto params = aircraft::Params::make();
    auto ia = aircraft::integral_action(params, 5.0, 600.0);
    Vec x(3);
    x << 200.0, 0.1, params.theta_star();
    const Vec xd = aircraft::to_deviation(params, x);
    Vec yr(1);
    yr << 0.1;
    const Vec out = integrator_rhs(ia, xd, yr, Vec::Zero(1), 1e9);
    CHECK(out[0] == doctest::Approx(200.0 * std::sin(0.1)).epsilon(1e-12));
    CHECK(out[0] == doctest::Approx(19.9667).epsilon(1e-4));
}

TEST_CASE("anti-windup term opposes the excess past the leak level") {
    IntegralAction ia = scalar_ia();
    ia.omega = 2.0;
    ia.zbar = 1.0;
    Vec x = Vec::Zero(1);
    Vec z(1);
    z << 2.0;  // z + H(0) = 2 = 2*zbar
    const Vec out = integrator_rhs(ia, x, Vec::Zero(1), z, 1e9);
    CHECK(out[0] < 0.0);  // pulls z back toward the dead zone
    // and the term is bounded by omega * (zbar + |z + H|)
    CHECK(std::abs(out[0]) <= ia.omega * (ia.zbar + 2.0) + 1e-12);
}

TEST_CASE("psi at the origin is zero for every variant") {
    const auto model = scalar_model();
    const auto ia = scalar_ia();

    ForwardingDesign a = scalar_design_a();
    probe_design(a, model);
    CHECK(psi(a, model, Vec::Zero(1), Vec::Zero(1)).norm() == 0.0);

    ForwardingDesign b = a;
    b.variant = ForwardingVariant::b;
    b.gamma_gain = [](const Vec&) { return 0.7; };
    b.J = default_coupling(1.0);
    CHECK(psi(b, model, Vec::Zero(1), Vec::Zero(1)).norm() == 0.0);

    ForwardingDesign c = b;
    c.variant = ForwardingVariant::c;
    c.H0 = compute_H0(model, ia, Mat::Zero(1, 1));
    CHECK(psi(c, model, Vec::Zero(1), Vec::Zero(1)).norm() == 0.0);

    ForwardingDesign ct = c;
    ct.variant = ForwardingVariant::c_teel;
    ct.eps = 0.5;
    CHECK(psi(ct, model, Vec::Zero(1), Vec::Zero(1)).norm() == 0.0);
}

TEST_CASE("variant a reproduces the hand-derived law -(2x + z)") {
    const auto model = scalar_model();
    const auto design = scalar_design_a();
    for (double x : {-1.0, -0.25, 0.0, 0.4, 2.0}) {
        for (double z : {-2.0, 0.0, 1.5}) {
            Vec xv(1), zv(1);
            xv << x;
            zv << z;
            const Vec u = psi(design, model, xv, zv);
            CHECK(u[0] == doctest::Approx(-(2.0 * x + z)).epsilon(1e-9));
        }
    }
}

TEST_CASE("H0 for the scalar system is -1 and matches dH/dx(0)") {
    const auto model = scalar_model();
    const auto ia = scalar_ia();
    const Mat h0 = compute_H0(model, ia, Mat::Zero(1, 1));
    CHECK(h0(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("H0 is zero when the regulated output has zero slope at the origin") {
    auto f = [](const Vec& x) { return Vec(-x); };
    auto g = [](const Vec&) { return Mat(Mat::Ones(1, 1)); };
    auto h = [](const Vec& x) { return Vec(x.array().square().matrix()); };
    const auto model = ControlAffineModel::create(1, 1, 1, f, g, h, {0});
    const auto ia = scalar_ia();
    const Mat h0 = compute_H0(model, ia, Mat::Zero(1, 1));
    CHECK(std::abs(h0(0, 0)) < 1e-6);
}

TEST_CASE("H0 reports a singular closed-loop linearization") {
    auto f = [](const Vec& x) {
        Vec dx(1);
        dx[0] = x[0] * x[0];  // zero linearization
        return dx;
    };
    auto g = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
    auto h = [](const Vec& x) { return x; };
    const auto model = ControlAffineModel::create(1, 1, 1, f, g, h, {0});
    CHECK_THROWS_AS(compute_H0(model, scalar_ia(), Mat::Zero(1, 1)), std::runtime_error);
}

TEST_CASE("extended Lyapunov values: origin, the worked variant-a point, variant-c growth") {
    const auto design = scalar_design_a();
    CHECK(extended_lyapunov(design, Vec::Zero(1), Vec::Zero(1)) == 0.0);

    Vec x(1), z(1);
    x << 1.0;
    z << 0.0;
    CHECK(extended_lyapunov(design, x, z) == doctest::Approx(1.0));  // 0.5 + 0.5*(0-(-1))^2

    ForwardingDesign c = design;
    c.variant = ForwardingVariant::c;
    c.H0 = Mat::Zero(1, 1);
    c.d_scale = [](double s) { return 2.0 * s; };
    double prev = -1.0;
    for (double zz : {0.0, 0.5, 1.0, 4.0}) {
        Vec zv(1);
        zv << zz;
        const double val = extended_lyapunov(c, Vec::Zero(1), zv);
        CHECK(val > prev);
        prev = val;
    }
}

TEST_CASE("closed-loop Lyapunov decrease for the scalar variant-a cascade") {
    const auto model = scalar_model();
    const auto design = scalar_design_a();
    const auto ia = scalar_ia();

    Rhs rhs = [&](double, const Vec& s) {
        Vec x = s.head(1), z = s.tail(1);
        const Vec u = psi(design, model, x, z);
        Vec out(2);
        out.head(1) = model.eval(x, u);
        out.tail(1) = ia.k(x, model.h_r(x));
        return out;
    };
    Probe probe = [&](double, const Vec& s) {
        StepDiagnostics d;
        d.Ve = extended_lyapunov(design, s.head(1), s.tail(1));
        return d;
    };
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 8.0;
    Vec s0(2);
    s0 << 1.0, -0.5;
    const Trace trace = integrate(rhs, s0, cfg, probe);
    REQUIRE(trace.ok());
    for (std::size_t k = 1; k < trace.Ve.size(); ++k)
        CHECK(trace.Ve[k] <= trace.Ve[k - 1] + 1e-9 * (1.0 + trace.Ve[k - 1]));
    CHECK(trace.Ve.back() < 1e-4);  // converged toward the origin
}

TEST_CASE("psi has a finite slope at the origin") {
    const auto model = scalar_model();
    const auto design = scalar_design_a();
    const Mat slope = numerical_jacobian(
        [&](const Vec& s) { return psi(design, model, s.head(1), s.tail(1)); }, Vec::Zero(2));
    CHECK(slope.allFinite());
}

TEST_CASE("make_proper: identity at infinity, 1/3 at the worked point, blow-up near the rim") {
    auto V = [](const Vec& x) { return x[0] * x[0]; };
    const auto same = make_proper(V, std::numeric_limits<double>::infinity());
    Vec p(1);
    p << 0.7;
    CHECK(same(p) == V(p));

    const double v_S = 1.0;  // S = (-1, 1)
    const auto proper = make_proper(V, v_S);
    Vec half(1);
    half << 0.5;
    CHECK(proper(half) == doctest::Approx(1.0 / 3.0));

    Vec near(1);
    near << std::sqrt(0.999);
    CHECK(proper(near) > 999.0 * V(near) - 1.0);

    Vec outside(1);
    outside << 1.5;
    CHECK_THROWS_AS(proper(outside), std::domain_error);
}

TEST_CASE("estimate_inf recovers the sampled infimum over a shell") {
    auto V = [](const Vec& x) { return x[0] * x[0]; };
    // shell: |x| in [1, 2]
    Sampler shell = [](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> mag(1.0, 2.0);
        std::uniform_int_distribution<int> sign(0, 1);
        Vec x(1);
        x << (sign(rng) ? 1.0 : -1.0) * mag(rng);
        return x;
    };
    const double v_S = estimate_inf(V, shell, 4000, 9);
    CHECK(v_S == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("upsilon violations and missing fields are rejected") {
    const auto model = scalar_model();
    ForwardingDesign bad = scalar_design_a();
    bad.J = [](const Vec&, const Vec& v) { return Vec(-v); };  // wrong sign
    CHECK_THROWS_AS(probe_design(bad, model), design_error);

    ForwardingDesign missing = scalar_design_a();
    missing.V = nullptr;
    CHECK_THROWS_AS(psi(missing, model, Vec::Zero(1), Vec::Zero(1)), config_error);
}

TEST_CASE("design report: scalar cascade satisfies the integral-action conditions") {
    const auto model = scalar_model();
    const auto design = scalar_design_a();
    const auto ia = scalar_ia();
    Vec lo = Vec::Constant(1, -2.0), hi = Vec::Constant(1, 2.0);
    const auto report = verify_design(&design, model, ia, make_box_sampler(lo, hi), 60, 21);
    CHECK(report.ok);
    CHECK(report.h_residual_max < 1e-8);       // H solves the cross-term equation exactly
    CHECK(report.k_zero_max == 0.0);           // k(x, 0) = 0
    CHECK(report.k_slope_zero_max < 1e-6);     // dk/dx(x, 0) = 0
    CHECK(report.upsilon_min > 0.0);
}
