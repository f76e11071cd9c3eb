#include "regul/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>

#include <nlohmann/json.hpp>

#include "regul/numeric.hpp"

namespace regul {

DecreaseVerdict lyapunov_decrease(const Trace& trace, Diagnostic which, double slack) {
    const std::vector<double>& values = (which == Diagnostic::Ve) ? trace.Ve : trace.Ul;
    if (values.empty()) throw std::invalid_argument("lyapunov_decrease: diagnostic not recorded");
    DecreaseVerdict verdict;
    verdict.pass = true;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (std::isnan(values[k]) || std::isnan(values[k - 1]))
            throw std::invalid_argument("lyapunov_decrease: diagnostic has gaps");
        const double allowed = slack * (1.0 + std::abs(values[k - 1]));
        const double increase = values[k] - values[k - 1];
        ++verdict.compared;
        if (increase > allowed && increase - allowed > verdict.worst_violation) {
            verdict.worst_violation = increase - allowed;
            verdict.worst_time = trace.t[k];
            verdict.pass = false;
        }
    }
    return verdict;
}

RateFit fit_exponential_rate(const std::vector<double>& t, const std::vector<double>& u) {
    RateFit fit;
    std::vector<double> ts, ls;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (u[i] > 0.0 && std::isfinite(u[i])) {
            ts.push_back(t[i]);
            ls.push_back(std::log(u[i]));
        }
    }
    if (ts.size() < 3) {
        fit.converged = true;
        return fit;
    }
    const auto n = static_cast<double>(ts.size());
    double st = 0, sl = 0, stt = 0, stl = 0, sll = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sl += ls[i];
        stt += ts[i] * ts[i];
        stl += ts[i] * ls[i];
        sll += ls[i] * ls[i];
    }
    const double denom = n * stt - st * st;
    if (std::abs(denom) < 1e-30) {
        fit.converged = true;
        return fit;
    }
    const double slope = (n * stl - st * sl) / denom;
    fit.rate = -slope;
    fit.points = static_cast<long>(ts.size());
    const double ss_tot = sll - sl * sl / n;
    const double intercept = (sl - slope * st) / n;
    double ss_res = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double e = ls[i] - (intercept + slope * ts[i]);
        ss_res += e * e;
    }
    fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

RateFit fit_contraction(const Trace& trace, Diagnostic which, double floor, double t_a,
                        double t_b) {
    const std::vector<double>& values = (which == Diagnostic::Ve) ? trace.Ve : trace.Ul;
    if (values.empty()) throw std::invalid_argument("fit_contraction: diagnostic not recorded");
    std::vector<double> ts, us;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (trace.t[k] < t_a || trace.t[k] > t_b) continue;
        if (!(values[k] > floor)) continue;
        ts.push_back(trace.t[k]);
        us.push_back(values[k]);
    }
    return fit_exponential_rate(ts, us);
}

EquilibriumResult find_equilibrium(const std::function<Vec(const Vec&)>& rhs, const Vec& seed,
                                   double newton_tol, int max_iter) {
    EquilibriumResult result;
    Vec x = seed;
    Vec fx = rhs(x);
    double res = fx.norm();

    for (int it = 0; it < max_iter; ++it) {
        result.iterations = it;
        if (res <= newton_tol) break;
        const Mat jac = numerical_jacobian(rhs, x, 1e-7);
        Vec step;
        try {
            step = solve_checked(jac, Vec(-fx), nullptr, "newton jacobian");
        } catch (const std::runtime_error&) {
            break;  // singular Jacobian: report best residual below
        }
        // Backtracking line search on |rhs|.
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vec cand = x + alpha * step;
            Vec fc;
            try {
                fc = rhs(cand);
            } catch (const std::exception&) {
                alpha *= 0.5;
                continue;
            }
            const double cres = fc.norm();
            if (std::isfinite(cres) && cres < res * (1.0 - 1e-4 * alpha)) {
                x = cand;
                fx = fc;
                res = cres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }

    result.point = x;
    result.residual = res;
    result.converged = res <= newton_tol;
    if (result.converged) {
        const Mat jac = numerical_jacobian(rhs, x, 1e-7);
        Eigen::EigenSolver<Mat> es(jac);
        result.eigenvalues = es.eigenvalues();
        result.spectral_abscissa = result.eigenvalues.real().maxCoeff();
        result.exponentially_stable = result.spectral_abscissa <= -1e-8;
    }
    return result;
}

namespace {

SweepRow sweep_one(const ClosedLoop& loop, double delta, const Vec& initial_state,
                   const IntegratorConfig& config, const SweepChecks& checks) {
    SweepRow row;
    row.delta = delta;
    const Trace trace = integrate(loop.as_rhs(), initial_state, config, loop.probe());
    row.trace_ok = trace.ok() && trace.terminated_by == "t_end";
    if (!row.trace_ok) {
        row.note = trace.failure.empty() ? trace.terminated_by : trace.failure;
        return row;
    }
    row.stayed_in_compact = true;
    if (checks.in_compact) {
        for (const Vec& s : trace.state) {
            const auto cls = ClosedLoopState::unpack(s, loop.n(), loop.r(), loop.has_observer());
            if (!checks.in_compact(cls)) {
                row.stayed_in_compact = false;
                row.note = "left the declared compact";
                break;
            }
        }
    }
    auto rhs_fn = [&loop](const Vec& s) { return loop.rhs(s); };
    const EquilibriumResult eq = find_equilibrium(rhs_fn, trace.last_state());
    row.equilibrium_found = eq.converged;
    if (eq.converged) {
        const auto cls = ClosedLoopState::unpack(eq.point, loop.n(), loop.r(), loop.has_observer());
        const Vec u = loop.control(cls);
        row.regulated_norm = loop.regulated_output(cls.x, u).norm();
        row.spectral_abscissa = eq.spectral_abscissa;
    } else {
        row.note = "newton did not converge (residual " + std::to_string(eq.residual) + ")";
    }
    row.pass = row.trace_ok && row.stayed_in_compact && row.equilibrium_found &&
               row.regulated_norm <= checks.regulated_tol &&
               row.spectral_abscissa <= checks.stability_margin;
    return row;
}

}  // namespace

SweepResult robustness_sweep(const std::function<ClosedLoop(double)>& loop_for,
                             const std::vector<double>& deltas, const Vec& initial_state,
                             const IntegratorConfig& config, const SweepChecks& checks) {
    SweepResult result;
    result.rows.resize(deltas.size());
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(deltas.size());
    for (double delta : deltas) {
        futures.push_back(std::async(std::launch::async, [&, delta] {
            try {
                return sweep_one(loop_for(delta), delta, initial_state, config, checks);
            } catch (const std::exception& ex) {
                SweepRow row;
                row.delta = delta;
                row.note = ex.what();
                return row;
            }
        }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) result.rows[i] = futures[i].get();

    // Largest grid magnitude below which every row passes.
    std::vector<std::size_t> order(result.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(result.rows[a].delta) < std::abs(result.rows[b].delta);
    });
    for (std::size_t i : order) {
        if (!result.rows[i].pass) break;
        result.largest_passing_delta = std::abs(result.rows[i].delta);
    }
    return result;
}

std::string SweepResult::to_csv() const {
    std::string out =
        "delta,pass,trace_ok,stayed_in_compact,equilibrium_found,regulated_norm,"
        "spectral_abscissa,note\n";
    char buf[64];
    for (const SweepRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.delta);
        out += buf;
        out += row.pass ? ",1" : ",0";
        out += row.trace_ok ? ",1" : ",0";
        out += row.stayed_in_compact ? ",1" : ",0";
        out += row.equilibrium_found ? ",1" : ",0";
        std::snprintf(buf, sizeof(buf), ",%.17g", row.regulated_norm);
        out += buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", row.spectral_abscissa);
        out += buf;
        out += ",\"" + row.note + "\"\n";
    }
    return out;
}

std::string SweepResult::to_json_string() const {
    nlohmann::json doc;
    doc["largest_passing_delta"] = largest_passing_delta;
    for (const SweepRow& row : rows) {
        doc["rows"].push_back({{"delta", row.delta},
                               {"pass", row.pass},
                               {"trace_ok", row.trace_ok},
                               {"stayed_in_compact", row.stayed_in_compact},
                               {"equilibrium_found", row.equilibrium_found},
                               {"regulated_norm", row.regulated_norm},
                               {"spectral_abscissa", row.spectral_abscissa},
                               {"note", row.note}});
    }
    return doc.dump(2);
}

bool invariance_check(const Trace& trace,
                      const std::function<bool(double, const Vec&)>& predicate, bool* warned) {
    if (warned) *warned = false;
    if (trace.samples() == 0) {
        if (warned) *warned = true;  // vacuous
        return true;
    }
    for (long k = 0; k < trace.samples(); ++k)
        if (!predicate(trace.t[k], trace.state[k])) return false;
    return true;
}

}  // namespace regul
