#include "regul/observer.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "regul/analysis.hpp"

namespace regul {

Vec transform_B(const ObserverChart& chart, const ControlAffineModel& model, const Vec& x,
                const Vec& u) {
    if (chart.in_domain && !chart.in_domain(x))
        throw std::domain_error("transform_B: state outside the observability region");
    const Mat dphi = chart.dphi(x);
    const Vec lie = dphi * model.eval(x, u);  // L_f phi + L_g phi u
    return lie - chart.A_of(u) * chart.phi(x);
}

namespace {

std::string state_to_string(const Vec& x) {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "]";
    return os.str();
}

}  // namespace

Vec observer_rhs(const ObserverChart& chart, const ControlAffineModel& model, const Vec& xhat,
                 const Vec& y, const Vec& u, double ell, const BarrierOutput* barrier,
                 double tau_margin, ObserverDiagnostics* diag) {
    const Mat dphi = chart.dphi(xhat);
    const Mat L = chart.L_of(ell);
    const Mat M = chart.M_of(ell);
    const Vec innovation = L * M * chart.K_of(u) * chart.N_of(ell) * (y - model.h(xhat));

    double cond = 0.0;
    Vec corr;
    try {
        corr = solve_checked(dphi, innovation, &cond, "observer dphi solve");
    } catch (const std::runtime_error&) {
        throw std::runtime_error("observer_rhs: singular chart Jacobian at xhat = " +
                                 state_to_string(xhat));
    }
    if (diag) {
        diag->dphi_condition = cond;
        diag->ill_conditioned = cond > chart.cond_warn_threshold;
        diag->tau = 0.0;
        diag->correction_norm = 0.0;
    }

    Vec rhs = model.eval(xhat, u) + corr;

    if (barrier) {
        const double h2 = barrier->value(xhat);
        if (h2 > 0.0) {
            const double floor = tau_floor(chart, model, *barrier, xhat, u, y, ell);
            const double tau = std::max(floor, 0.0) + tau_margin;
            const Vec grad = barrier->gradient(xhat);
            // E = -tau h2 dphi^{-1} L M P^{-1} L' dphi^{-T} grad'
            const Vec w = solve_checked(Mat(dphi.transpose()), grad, nullptr, "barrier dphi' solve");
            const Vec mid = L * (M * solve_checked(chart.P, Vec(L.transpose() * w)));
            const Vec correction = -tau * h2 * solve_checked(dphi, mid);
            rhs += correction;
            if (diag) {
                diag->tau = tau;
                diag->correction_norm = correction.norm();
            }
        }
    }
    return rhs;
}

double tau_floor(const ObserverChart& chart, const ControlAffineModel& model,
                 const BarrierOutput& barrier, const Vec& xhat, const Vec& u, const Vec& y,
                 double ell) {
    const double h2 = barrier.value(xhat);
    const Vec grad = barrier.gradient(xhat);
    const Mat dphi = chart.dphi(xhat);
    const Mat L = chart.L_of(ell);
    const Mat M = chart.M_of(ell);

    // Uncorrected observer field: f + g u + dphi^{-1} L M K N (y - h).
    const Vec innovation = L * M * chart.K_of(u) * chart.N_of(ell) * (y - model.h(xhat));
    const Vec field = model.eval(xhat, u) + solve_checked(dphi, innovation);
    const Vec w = solve_checked(Mat(dphi.transpose()), grad, nullptr, "tau_floor dphi' solve");
    const Mat m_pinv = M * invert_checked(chart.P);
    const Vec scaled = spd_inverse_sqrt(0.5 * (m_pinv + m_pinv.transpose())) * (L.transpose() * w);
    const double denom = scaled.squaredNorm();
    if (denom < 1e-14) {
        if (h2 > 0.0)
            throw std::runtime_error(
                "tau_floor: degenerate barrier gradient (denominator below 1e-14 with h2 > 0)");
        return 0.0;
    }
    const double r_term = grad.dot(field);
    return 8.0 * h2 * h2 * r_term / denom;
}

double observer_lyapunov(const ObserverChart& chart, const Vec& x, const Vec& xhat, double ell) {
    if (chart.in_domain && (!chart.in_domain(x) || !chart.in_domain(xhat)))
        throw std::domain_error("observer_lyapunov: point outside the observability region");
    const Vec diff = chart.phi(x) - chart.phi(xhat);
    const Mat L = chart.L_of(ell);
    const Mat M = chart.M_of(ell);
    const Mat quad = L * (M * solve_checked_mat(chart.P, Mat(L.transpose())));
    const Vec w = solve_checked(quad, diff);
    return 0.5 * diff.dot(w);
}

namespace {

void push(ChartReport& report, std::string item, bool pass, double margin, std::string detail = "") {
    report.items.push_back({std::move(item), pass, margin, std::move(detail)});
}

}  // namespace

ChartReport verify_chart(const ObserverChart& chart, const ControlAffineModel& model,
                         const std::vector<double>& gain_ladder, const Sampler& state_sampler,
                         const Sampler& input_sampler, long n_samples, std::uint64_t seed) {
    ChartReport report;
    report.ladder = gain_ladder;
    std::mt19937_64 rng(seed);

    std::vector<Vec> xs, us;
    for (long i = 0; i < n_samples; ++i) {
        Vec x = state_sampler(rng);
        if (chart.in_domain && !chart.in_domain(x)) continue;
        xs.push_back(std::move(x));
        us.push_back(input_sampler(rng));
    }
    if (xs.size() < 2) {
        push(report, "sampling", false, 0.0, "fewer than two in-domain samples drawn");
        report.all_pass = false;
        return report;
    }

    // O1: phi(0) = 0, dphi nonsingular on samples, dphi consistent with phi.
    const double phi0 = chart.phi(Vec::Zero(chart.n)).norm();
    push(report, "O1 phi(0)=0", phi0 <= 1e-10, 1e-10 - phi0);
    double min_abs_det = std::numeric_limits<double>::infinity();
    double max_dphi_err = 0.0;
    for (const Vec& x : xs) {
        const Mat dphi = chart.dphi(x);
        min_abs_det = std::min(min_abs_det, std::abs(dphi.determinant()));
        const Mat fd = numerical_jacobian(chart.phi, x);
        const double scale = std::max(1.0, fd.norm());
        max_dphi_err = std::max(max_dphi_err, (dphi - fd).norm() / scale);
    }
    push(report, "O1 dphi nonsingular", min_abs_det > 1e-12, min_abs_det,
         "min |det dphi| over samples");
    push(report, "O1 dphi consistent", max_dphi_err <= 1e-6, 1e-6 - max_dphi_err,
         "max relative gap to finite differences");

    // O2: C phi = h on samples.
    double o2 = 0.0;
    for (const Vec& x : xs) o2 = std::max(o2, (chart.C * chart.phi(x) - model.h(x)).norm());
    push(report, "O2 C*phi=h", o2 <= 1e-12, 1e-12 - o2);

    // O3: commutation identities per rung and the matrix inequality.
    double commut = 0.0, ncl = 0.0;
    for (double ell : gain_ladder) {
        const Mat L = chart.L_of(ell);
        const Mat M = chart.M_of(ell);
        const Mat N = chart.N_of(ell);
        for (const Vec& u : us) {
            const Mat A = chart.A_of(u);
            commut = std::max(commut, (A * L - L * M * A).norm());
        }
        ncl = std::max(ncl, (N * chart.C * L - chart.C).norm());
    }
    push(report, "O3 A L = L M A", commut <= 1e-12, 1e-12 - commut);
    push(report, "O3 N C L = C", ncl <= 1e-12, 1e-12 - ncl,
         ncl > 1e-12 ? "largest violating entry magnitude " + std::to_string(ncl) : "");

    double ineq_margin = std::numeric_limits<double>::infinity();
    for (const Vec& u : us) {
        const Mat A = chart.A_of(u);
        const Mat K = chart.K_of(u);
        const Mat S = chart.P * (A - K * chart.C) + (A - K * chart.C).transpose() * chart.P +
                      2.0 * chart.nu * chart.P;
        ineq_margin = std::min(ineq_margin, sym_eig_min(-S));
    }
    push(report, "O3 P(A-KC)+(.)'P <= -2 nu P", ineq_margin >= 0.0, ineq_margin);

    // O4: M P^{-1} symmetric, min eigenvalue increasing along the ladder.
    const Mat p_inv = invert_checked(chart.P);
    double sym_err = 0.0;
    std::vector<double> mpinv_min;
    for (double ell : gain_ladder) {
        const Mat mp = chart.M_of(ell) * p_inv;
        sym_err = std::max(sym_err, (mp - mp.transpose()).norm());
        mpinv_min.push_back(sym_eig_min(0.5 * (mp + mp.transpose())));
    }
    push(report, "O4 M P^-1 symmetric", sym_err <= 1e-10, 1e-10 - sym_err);
    bool increasing = true;
    for (std::size_t i = 1; i < mpinv_min.size(); ++i)
        if (mpinv_min[i] <= mpinv_min[i - 1]) increasing = false;
    push(report, "O4 lambda_min(M P^-1) increasing", increasing,
         mpinv_min.empty() ? 0.0 : mpinv_min.back() - mpinv_min.front());

    // O5: find the smallest integer exponent making both bounds hold on all rungs.
    int found_d = -1;
    for (int d = 1; d <= 64 && found_d < 0; ++d) {
        bool ok = true;
        for (std::size_t i = 0; i < gain_ladder.size(); ++i) {
            const Mat L = chart.L_of(gain_ladder[i]);
            const Mat quad = L * chart.M_of(gain_ladder[i]) * p_inv * L.transpose();
            const Mat sym = 0.5 * (quad + quad.transpose());
            const double lmax = sym_eig_max(sym), lmin = sym_eig_min(sym);
            const double base = std::pow(mpinv_min[i], d);
            if (!(lmax <= base) || !(lmin * base >= 1.0)) ok = false;
        }
        if (ok) found_d = d;
    }
    report.suggested_d = found_d;
    push(report, "O5 eigenvalue bounds", found_d > 0, static_cast<double>(found_d),
         found_d > 0 ? "holds with d = " + std::to_string(found_d)
                     : "no integer d <= 64 satisfies both bounds on the ladder");

    // O6/O7: sampled Lipschitz ratio per rung, monotone decrease expected.
    const Mat p_sqrt = Mat(Eigen::SelfAdjointEigenSolver<Mat>(chart.P).operatorSqrt());
    for (double ell : gain_ladder) {
        const Mat L = chart.L_of(ell);
        const Mat M = chart.M_of(ell);
        const Mat l_inv = invert_checked(L);
        const Mat m_inv = invert_checked(M);
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const Vec& xa = xs[i];
            const Vec& xb = xs[i + 1];
            const Vec& u = us[i];
            const Vec db = transform_B(chart, model, xa, u) - transform_B(chart, model, xb, u);
            const Vec dphi_gap = chart.phi(xa) - chart.phi(xb);
            const double denom = (p_sqrt * l_inv * dphi_gap).norm();
            if (denom < 1e-12) continue;
            worst = std::max(worst, (p_sqrt * m_inv * l_inv * db).norm() / denom);
        }
        report.c_ell.push_back(worst);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < report.c_ell.size(); ++i)
        if (report.c_ell[i] > report.c_ell[i - 1] + 1e-12) decreasing = false;
    push(report, "O6/O7 c_ell decreasing", decreasing,
         report.c_ell.empty() ? 0.0 : report.c_ell.front() - report.c_ell.back(),
         "sampled estimate, not a certified supremum");

    report.all_pass = true;
    for (const auto& item : report.items) report.all_pass = report.all_pass && item.pass;
    return report;
}

std::string ChartReport::to_json_string() const {
    nlohmann::json doc;
    doc["all_pass"] = all_pass;
    doc["ladder"] = ladder;
    doc["c_ell"] = c_ell;
    doc["suggested_d"] = suggested_d;
    for (const auto& item : items) {
        doc["items"].push_back({{"item", item.item},
                                {"pass", item.pass},
                                {"margin", item.margin},
                                {"detail", item.detail}});
    }
    return doc.dump(2);
}

BarrierOutput build_h2_quadratic(const ObserverChart& chart, const Mat& Q, double varrho,
                                 double eps) {
    if (!(varrho > 0.0)) throw std::invalid_argument("build_h2_quadratic: varrho must be > 0");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("build_h2_quadratic: eps must be in (0,1)");
    const Mat q_sym = 0.5 * (Q + Q.transpose());
    if (sym_eig_min(q_sym) <= 0.0)
        throw std::invalid_argument("build_h2_quadratic: Q must be positive definite");

    auto phi = chart.phi;
    auto dphi = chart.dphi;
    BarrierOutput barrier;
    barrier.value = [phi, q_sym, varrho, eps](const Vec& x) {
        const Vec ph = phi(x);
        const double hinge = ph.dot(q_sym * ph) / varrho - eps;
        return hinge > 0.0 ? hinge * hinge : 0.0;
    };
    barrier.gradient = [phi, dphi, q_sym, varrho, eps](const Vec& x) {
        const Vec ph = phi(x);
        const double hinge = ph.dot(q_sym * ph) / varrho - eps;
        if (hinge <= 0.0) return Vec(Vec::Zero(x.size()));
        const Vec dq = 2.0 * (q_sym * ph) / varrho;            // d(quad)/dphi
        return Vec(2.0 * hinge * dphi(x).transpose() * dq);
    };
    return barrier;
}

ContractionResult contraction_rate(const ObserverChart& chart, const ControlAffineModel& model,
                                   const std::function<Vec(double, const Vec&)>& input,
                                   const Vec& x0, const Vec& xhat0, double ell,
                                   const IntegratorConfig& config, double fit_start_fraction,
                                   double floor) {
    ContractionResult result;
    if ((x0 - xhat0).norm() == 0.0) {
        result.converged_immediately = true;
        return result;
    }
    const int n = model.n;
    Rhs rhs = [&](double t, const Vec& s) {
        const Vec x = s.head(n);
        const Vec xhat = s.tail(n);
        const Vec u = input(t, x);
        Vec out(2 * n);
        out.head(n) = model.eval(x, u);
        out.tail(n) = observer_rhs(chart, model, xhat, model.h(x), u, ell);
        return out;
    };
    Vec s0(2 * n);
    s0 << x0, xhat0;
    Probe probe = [&](double, const Vec& s) {
        StepDiagnostics d;
        d.Ul = observer_lyapunov(chart, s.head(n), s.tail(n), ell);
        return d;
    };
    result.trace = integrate(rhs, s0, config, probe);

    const double t_start =
        config.t0 + fit_start_fraction * (config.t_end - config.t0);
    std::vector<double> ts, us;
    for (long k = 0; k < result.trace.samples(); ++k) {
        if (result.trace.t[k] < t_start) continue;
        if (!(result.trace.Ul[k] > floor)) break;
        ts.push_back(result.trace.t[k]);
        us.push_back(result.trace.Ul[k]);
    }
    const RateFit fit = fit_exponential_rate(ts, us);
    result.converged_immediately = fit.converged;
    result.rate = fit.rate;
    result.r_squared = fit.r_squared;
    return result;
}

}  // namespace regul
