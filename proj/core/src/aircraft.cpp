#include "regul/aircraft.hpp"

#include <cmath>

namespace regul {
namespace aircraft {

double Params::theta_star() const { return std::asin(g / (pounds * v0 * v0)); }

Params Params::make() { return make(Params{}); }

Params Params::make(Params p) {
    const double ratio = p.g / (p.pounds * p.v0 * p.v0);
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("aircraft::Params: g/(pounds v0^2) must lie in (0,1)");
    for (double gain : {p.k1, p.k2, p.k3, p.k4, p.k_e, p.k_q})
        if (!(gain > 0.0)) throw std::invalid_argument("aircraft::Params: gains must be > 0");
    if (p.eps3 == 0.0) p.eps3 = p.pounds * p.v0;
    if (!(p.eps4 > 0.0) || !(p.gamma_dot_max > 0.0) || !(p.delta_width > 0.0) ||
        !(p.v_cap > 0.0) || !(p.v_cap_width > 0.0))
        throw std::invalid_argument("aircraft::Params: barrier constants must be > 0");
    return p;
}

Vec dynamics(const Params& params, const Vec& x, const Vec& u) {
    const double v = x[0], gamma = x[1], theta = x[2];
    if (!(v > 0.0))
        throw std::domain_error("aircraft::dynamics: model makes sense for v > 0 only");
    Vec dx(3);
    dx[0] = u[0] - params.g * std::sin(gamma);
    dx[1] = params.pounds * v * std::sin(theta - gamma) - params.g * std::cos(gamma) / v;
    dx[2] = u[1];
    return dx;
}

double phugoid_invariant(const Params& params, double v, double gamma) {
    if (!(v > 0.0)) throw std::domain_error("phugoid_invariant: v > 0 required");
    const double s = v / params.v0;
    return s * s * s / 3.0 - s * std::cos(gamma);
}

double lyapunov(const Params& params, double z, double v, double gamma, double theta) {
    if (!(v > 0.0)) throw std::domain_error("aircraft::lyapunov: v > 0 required");
    const double v0 = params.v0;
    const double eta = (2.0 * params.g * z + v * v - v0 * v0) / (v0 * v0);
    const double w = theta - gamma - params.theta_star();
    return phugoid_invariant(params, v, gamma) + 2.0 / 3.0 + 0.25 * params.k1 * eta * eta +
           0.5 * params.k2 * w * w;
}

namespace {

/// (pounds v0^2 sin(d) - g) / (d - theta_star), with the removable 0/0
/// replaced by its limit pounds v0^2 cos(theta_star) inside the switch
/// window.
double q_ratio(const Params& params, double d) {
    const double lv02 = params.pounds * params.v0 * params.v0;
    const double dstar = params.theta_star();
    if (std::abs(d - dstar) < params.sing_tol) return lv02 * std::cos(dstar);
    return (lv02 * std::sin(d) - params.g) / (d - dstar);
}

}  // namespace

Vec feedback(const Params& params, double z, double v, double gamma, double theta) {
    if (!(v > 0.0)) throw std::domain_error("aircraft::feedback: v > 0 required");
    const double v0 = params.v0;
    const double eta = (2.0 * params.g * z + v * v - v0 * v0) / (v0 * v0);
    const double w = theta - gamma - params.theta_star();
    const double d = theta - gamma;

    SmoothSaturation sat_e(params.k_e, params.varsigma);
    const double e_raw =
        params.k3 * (v * v / (v0 * v0) - std::cos(gamma) + params.k1 * eta * (v / v0));
    const double e = -sat_e(e_raw);

    const double q_raw = -(q_ratio(params, d) * v * v * std::sin(gamma) / (params.k2 * v0 * v0 * v0) +
                           params.g * std::cos(gamma) / v -
                           params.pounds * v * std::sin(d) + params.k4 * w);
    SmoothSaturation sat_q(params.k_q, params.varsigma);

    Vec u(2);
    u[0] = e;
    u[1] = sat_q(q_raw);
    return u;
}

double gamma_dot(const Params& params, double v, double gamma, double theta) {
    return params.pounds * v * std::sin(theta - gamma) - params.g * std::cos(gamma) / v;
}

Vec gamma_dot_gradient(const Params& params, double v, double gamma, double theta) {
    Vec grad(3);  // d/dv, d/dgamma, d/dtheta
    grad[0] = params.pounds * std::sin(theta - gamma) + params.g * std::cos(gamma) / (v * v);
    grad[1] = -params.pounds * v * std::cos(theta - gamma) + params.g * std::sin(gamma) / v;
    grad[2] = params.pounds * v * std::cos(theta - gamma);
    return grad;
}

namespace {

struct Hinge {
    double value = 0.0;
    double slope = 0.0;  // d(value)/d(argument of the inner expression)
};

Hinge squared_hinge(double arg) {
    if (arg <= 0.0) return {};
    return {arg * arg, 2.0 * arg};
}

}  // namespace

double h2(const Params& params, const Vec& x) {
    const double v = x[0], gamma = x[1], theta = x[2];
    const double pi2 = M_PI * M_PI;
    const double gd = gamma_dot(params, v, gamma, theta);
    const double t1 = squared_hinge(4.0 * theta * theta / pi2 - params.eps1).value;
    const double t2 = squared_hinge(4.0 * gamma * gamma / pi2 - params.eps2).value;
    const double t3 = squared_hinge(params.eps3 * (theta - gamma) - gd - params.eps4).value;
    const double t4 = squared_hinge(gd / params.gamma_dot_max - params.eps5).value;
    const double t5 =
        squared_hinge((params.delta_floor - (theta - gamma)) / params.delta_width).value;
    const double t6 = squared_hinge((v - params.v_cap) / params.v_cap_width).value;
    return t1 + t2 + t3 + t4 + t5 + t6;
}

Vec h2_gradient(const Params& params, const Vec& x) {
    const double v = x[0], gamma = x[1], theta = x[2];
    const double pi2 = M_PI * M_PI;
    const double gd = gamma_dot(params, v, gamma, theta);
    const Vec dgd = gamma_dot_gradient(params, v, gamma, theta);

    Vec grad = Vec::Zero(3);
    const Hinge h1 = squared_hinge(4.0 * theta * theta / pi2 - params.eps1);
    grad[2] += h1.slope * 8.0 * theta / pi2;
    const Hinge hg = squared_hinge(4.0 * gamma * gamma / pi2 - params.eps2);
    grad[1] += hg.slope * 8.0 * gamma / pi2;
    const Hinge h3 = squared_hinge(params.eps3 * (theta - gamma) - gd - params.eps4);
    if (h3.slope != 0.0) {
        grad[0] += h3.slope * (-dgd[0]);
        grad[1] += h3.slope * (-params.eps3 - dgd[1]);
        grad[2] += h3.slope * (params.eps3 - dgd[2]);
    }
    const Hinge h4 = squared_hinge(gd / params.gamma_dot_max - params.eps5);
    if (h4.slope != 0.0) grad += (h4.slope / params.gamma_dot_max) * dgd;
    const Hinge h5 =
        squared_hinge((params.delta_floor - (theta - gamma)) / params.delta_width);
    if (h5.slope != 0.0) {
        grad[1] += h5.slope / params.delta_width;
        grad[2] -= h5.slope / params.delta_width;
    }
    const Hinge h6 = squared_hinge((v - params.v_cap) / params.v_cap_width);
    if (h6.slope != 0.0) grad[0] += h6.slope / params.v_cap_width;
    return grad;
}

Vec to_deviation(const Params& params, const Vec& x_physical) {
    Vec d(3);
    d[0] = x_physical[0] - params.v0;
    d[1] = x_physical[1];
    d[2] = x_physical[2] - params.theta_star();
    return d;
}

Vec from_deviation(const Params& params, const Vec& x_deviation) {
    Vec x(3);
    x[0] = x_deviation[0] + params.v0;
    x[1] = x_deviation[1];
    x[2] = x_deviation[2] + params.theta_star();
    return x;
}

ControlAffineModel model(const Params& params) {
    auto f = [params](const Vec& xd) {
        return dynamics(params, from_deviation(params, xd), Vec::Zero(2));
    };
    auto g = [](const Vec&) {
        Mat gm = Mat::Zero(3, 2);
        gm(0, 0) = 1.0;  // thrust acts on dv/dt
        gm(2, 1) = 1.0;  // pitch rate acts on dtheta/dt
        return gm;
    };
    auto h = [](const Vec& xd) {
        Vec y(2);
        y[0] = xd[2];  // theta - theta_star
        y[1] = xd[1];  // gamma
        return y;
    };
    return ControlAffineModel::create(3, 2, 2, std::move(f), std::move(g), std::move(h), {1});
}

bool xi_membership(const Params& params, const Vec& phi) {
    const double half_pi = M_PI / 2.0;
    if (!(std::abs(phi[0]) < half_pi) || !(std::abs(phi[1]) < half_pi)) return false;
    const double gap = phi[0] - phi[1];  // theta - gamma
    if (gap <= 0.0)
        return phi[2] < -2.0 * std::sqrt(params.g * params.pounds * std::abs(gap));
    return true;
}

ObserverChart chart(const Params& params) {
    ObserverChart ch;
    ch.n = 3;
    ch.p = 2;
    ch.phi = [params](const Vec& xd) {
        const Vec x = from_deviation(params, xd);
        Vec phi(3);
        phi[0] = xd[2];  // theta - theta_star, bit-exact with the model output
        phi[1] = xd[1];
        phi[2] = gamma_dot(params, x[0], x[1], x[2]);
        return phi;
    };
    ch.dphi = [params](const Vec& xd) {
        const Vec x = from_deviation(params, xd);
        const Vec dgd = gamma_dot_gradient(params, x[0], x[1], x[2]);
        Mat j = Mat::Zero(3, 3);
        j(0, 2) = 1.0;
        j(1, 1) = 1.0;
        j.row(2) = dgd.transpose();
        return j;
    };

    ch.C = Mat::Zero(2, 3);
    ch.C(0, 0) = 1.0;
    ch.C(1, 1) = 1.0;

    Mat a = Mat::Zero(3, 3);
    a(1, 2) = 1.0;
    ch.A_of = [a](const Vec&) { return a; };

    ch.P = Mat::Zero(3, 3);
    ch.P(0, 0) = 0.5;
    ch.P(1, 1) = 0.5;
    ch.P(2, 2) = 0.5;
    ch.P(1, 2) = ch.P(2, 1) = -0.4;  // 2 p23 <= -nu p33
    ch.nu = params.nu;

    // Raise nu_k until the quadratic-stability margin is nonnegative.
    double nu_k = params.nu_k;
    Mat K;
    for (int attempt = 0; attempt < 40; ++attempt) {
        K = nu_k * solve_checked_mat(ch.P, Mat(ch.C.transpose()));
        const Mat S = ch.P * (a - K * ch.C) + (a - K * ch.C).transpose() * ch.P +
                      2.0 * ch.nu * ch.P;
        if (sym_eig_min(-S) >= 0.0) break;
        nu_k *= 2.0;
        if (attempt == 39)
            throw design_error("aircraft::chart: could not reach a nonnegative margin");
    }
    ch.K_of = [K](const Vec&) { return K; };

    ch.L_of = [](double ell) {
        Mat l = Mat::Identity(3, 3);
        l(2, 2) = ell;
        return l;
    };
    ch.M_of = [](double ell) { return Mat(ell * Mat::Identity(3, 3)); };
    ch.N_of = [](double) { return Mat(Mat::Identity(2, 2)); };

    ch.in_domain = [params](const Vec& xd) {
        const Vec x = from_deviation(params, xd);
        const double half_pi = M_PI / 2.0;
        return x[0] > 0.0 && std::abs(x[1]) < half_pi && std::abs(x[2]) < half_pi;
    };
    return ch;
}

BarrierOutput barrier(const Params& params) {
    BarrierOutput bar;
    bar.value = [params](const Vec& xd) { return h2(params, from_deviation(params, xd)); };
    bar.gradient = [params](const Vec& xd) {
        return h2_gradient(params, from_deviation(params, xd));
    };
    return bar;
}

IntegralAction integral_action(const Params& params, double omega, double zbar) {
    IntegralAction ia;
    ia.r = 1;
    ia.omega = omega;
    ia.zbar = zbar;
    ia.varsigma = params.varsigma;
    ia.k = [params](const Vec& xd, const Vec& yr) {
        Vec out(1);
        out[0] = (xd[0] + params.v0) * std::sin(yr[0]);
        return out;
    };
    ia.lipschitz = [params](const Vec& xd) { return std::abs(xd[0] + params.v0); };
    // Leak argument z + H with H = (v^2 - v0^2)/(2g): the combination the
    // Lyapunov function penalizes, zero at trim.
    ia.H_windup = [params](const Vec& xd) {
        const double v = xd[0] + params.v0;
        Vec out(1);
        out[0] = (v * v - params.v0 * params.v0) / (2.0 * params.g);
        return out;
    };
    return ia;
}

StateFeedback state_feedback(const Params& params) {
    StateFeedback fb;
    fb.psi = [params](const Vec& xd, const Vec& z) {
        const Vec x = from_deviation(params, xd);
        return feedback(params, z[0], x[0], x[1], x[2]);
    };
    fb.Ve = [params](const Vec& xd, const Vec& z) {
        const Vec x = from_deviation(params, xd);
        return lyapunov(params, z[0], x[0], x[1], x[2]);
    };
    return fb;
}

ProcessModel process(const Params& params, const std::string& family, double delta) {
    const ControlAffineModel base = model(params);
    if (family == "lift-scale") {
        Params perturbed = params;
        perturbed.pounds *= (1.0 + delta);
        auto xi = [params, perturbed](const Vec& xd, const Vec& u) {
            return dynamics(perturbed, from_deviation(params, xd), u);
        };
        auto zeta = [base](const Vec& xd, const Vec&) { return base.h(xd); };
        return ProcessModel::create(std::move(xi), std::move(zeta), base);
    }
    if (family == "theta-bias") {
        auto xi = [params](const Vec& xd, const Vec& u) {
            return dynamics(params, from_deviation(params, xd), u);
        };
        auto zeta = [base, delta](const Vec& xd, const Vec&) {
            Vec y = base.h(xd);
            y[0] += delta;
            return y;
        };
        return ProcessModel::create(std::move(xi), std::move(zeta), base);
    }
    if (family == "thrust-offset") {
        auto xi = [params, delta](const Vec& xd, const Vec& u) {
            Vec dx = dynamics(params, from_deviation(params, xd), u);
            dx[0] += delta;
            return dx;
        };
        auto zeta = [base](const Vec& xd, const Vec&) { return base.h(xd); };
        return ProcessModel::create(std::move(xi), std::move(zeta), base);
    }
    throw config_error("aircraft::process: unknown perturbation family '" + family + "'");
}

}  // namespace aircraft
}  // namespace regul
