#include "regul/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "regul/numeric.hpp"

namespace regul {

int EventSet::register_event(EventPredicate predicate, Action action, std::string name) {
    entries_.push_back(Entry{std::move(predicate), action, std::move(name)});
    return static_cast<int>(entries_.size()) - 1;
}

namespace {

struct Stepper {
    const Rhs& rhs;

    Vec rk4_step(double t, const Vec& x, double h) const {
        const Vec k1 = rhs(t, x);
        const Vec k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
        const Vec k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
        const Vec k4 = rhs(t + h, x + h * k3);
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    // Dormand-Prince 5(4) pair; returns the 5th-order solution and the
    // scaled error estimate.
    Vec dp45_step(double t, const Vec& x, double h, double rtol, double atol,
                  double* err_norm) const {
        static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        const Vec k1 = rhs(t, x);
        const Vec k2 = rhs(t + c2 * h, x + h * (k1 / 5.0));
        const Vec k3 = rhs(t + c3 * h, x + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
        const Vec k4 = rhs(t + c4 * h, x + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3));
        const Vec k5 = rhs(t + c5 * h,
                           x + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 +
                                    64448.0 / 6561 * k3 - 212.0 / 729 * k4));
        const Vec k6 = rhs(t + h, x + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 +
                                           46732.0 / 5247 * k3 + 49.0 / 176 * k4 -
                                           5103.0 / 18656 * k5));
        const Vec x5 = x + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 -
                                2187.0 / 6784 * k5 + 11.0 / 84 * k6);
        const Vec k7 = rhs(t + h, x5);
        const Vec x4 = x + h * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 + 393.0 / 640 * k4 -
                                92097.0 / 339200 * k5 + 187.0 / 2100 * k6 + 1.0 / 40 * k7);
        double acc = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            const double scale = atol + rtol * std::max(std::abs(x[i]), std::abs(x5[i]));
            const double e = (x5[i] - x4[i]) / scale;
            acc += e * e;
        }
        *err_norm = std::sqrt(acc / static_cast<double>(x.size()));
        return x5;
    }
};

}  // namespace

Trace integrate(const Rhs& rhs, const Vec& x0, const IntegratorConfig& config,
                const Probe& probe, const EventSet& events) {
    Trace trace;
    double t = config.t0;
    Vec x = x0;
    double next_record = config.t0;

    auto record = [&](double tk, const Vec& xk) {
        trace.t.push_back(tk);
        trace.state.push_back(xk);
        if (probe) {
            const StepDiagnostics d = probe(tk, xk);
            trace.u.push_back(d.u);
            trace.y.push_back(d.y);
            trace.yr.push_back(d.yr);
            trace.Ve.push_back(d.Ve);
            trace.Ul.push_back(d.Ul);
            trace.h2hat.push_back(d.h2hat);
            trace.sat_active.push_back(d.sat_active ? 1 : 0);
        }
    };

    auto check_events = [&](double tk, const Vec& xk) -> bool {
        bool stop = false;
        for (const auto& entry : events.entries()) {
            if (entry.predicate(tk, xk)) {
                trace.events.push_back(
                    {entry.name, tk, trace.samples() - 1, entry.action == EventSet::Action::stop});
                if (entry.action == EventSet::Action::stop) stop = true;
            }
        }
        return stop;
    };

    record(t, x);
    if (check_events(t, x)) {
        trace.terminated_by = "event:" + trace.events.back().name;
        return trace;
    }

    const Stepper stepper{rhs};
    const bool fixed = (config.method == IntegratorConfig::Method::rk4);
    double h = config.dt;
    const double t_end = config.t_end;

    for (long step = 0; step < config.max_steps; ++step) {
        if (t >= t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
            trace.terminated_by = "t_end";
            return trace;
        }
        double h_try = std::min(h, t_end - t);
        Vec x_new;
        double t_new;
        try {
            if (fixed) {
                x_new = stepper.rk4_step(t, x, h_try);
                t_new = t + h_try;
            } else {
                // adaptive: retry until the scaled error passes; domain
                // errors or non-finite values in trial evaluations reject
                // the step like an overlarge error estimate.
                for (;;) {
                    double err = std::numeric_limits<double>::infinity();
                    bool trial_failed = false;
                    try {
                        x_new = stepper.dp45_step(t, x, h_try, config.rtol, config.atol, &err);
                    } catch (const std::exception&) {
                        trial_failed = true;
                    }
                    if (!trial_failed && !std::isfinite(err)) trial_failed = true;
                    if (!trial_failed && err <= 1.0) {
                        t_new = t + h_try;
                        const double grow =
                            0.9 * std::pow(std::max(err, 1e-10), -0.2);
                        h = h_try * std::min(5.0, std::max(0.2, grow));
                        break;
                    }
                    const double shrink =
                        trial_failed ? 0.25 : std::max(0.2, 0.9 * std::pow(err, -0.2));
                    h_try *= shrink;
                    if (h_try < 1e-14 * std::max(1.0, std::abs(t))) {
                        trace.failure = trial_failed ? "step rejection underflow (domain error)"
                                                     : "step-size underflow";
                        trace.terminated_by = "error";
                        return trace;
                    }
                }
            }
        } catch (const std::exception& ex) {
            trace.failure = ex.what();
            trace.terminated_by = "error";
            return trace;
        }

        if (!is_finite(x_new)) {
            trace.failure = "non-finite state";
            trace.terminated_by = "error";
            return trace;
        }

        t = t_new;
        x = x_new;
        if (config.record_every <= 0.0 || t >= next_record + config.record_every - 1e-12 ||
            t >= t_end - 1e-12) {
            record(t, x);
            next_record = t;
            if (check_events(t, x)) {
                trace.terminated_by = "event:" + trace.events.back().name;
                return trace;
            }
        }
    }
    trace.terminated_by = "max_steps";
    return trace;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

std::vector<std::string> column_names(const Trace& trace) {
    std::vector<std::string> names;
    names.emplace_back("t");
    const int nx = trace.state.empty() ? 0 : static_cast<int>(trace.state.front().size());
    if (static_cast<int>(trace.state_names.size()) == nx) {
        for (const auto& s : trace.state_names) names.push_back(s);
    } else {
        for (int i = 0; i < nx; ++i) names.push_back("x" + std::to_string(i));
    }
    if (!trace.u.empty()) {
        for (int i = 0; i < trace.u.front().size(); ++i) names.push_back("u" + std::to_string(i));
        for (int i = 0; i < trace.y.front().size(); ++i) names.push_back("y" + std::to_string(i));
        names.emplace_back("V_e");
        names.emplace_back("U_ell");
        names.emplace_back("h2hat");
    }
    return names;
}

}  // namespace

std::string trace_to_csv(const Trace& trace) {
    std::string out;
    const auto names = column_names(trace);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    out += '\n';
    for (long k = 0; k < trace.samples(); ++k) {
        append_double(out, trace.t[k]);
        const Vec& x = trace.state[k];
        for (int i = 0; i < x.size(); ++i) {
            out += ',';
            append_double(out, x[i]);
        }
        if (!trace.u.empty()) {
            for (int i = 0; i < trace.u[k].size(); ++i) {
                out += ',';
                append_double(out, trace.u[k][i]);
            }
            for (int i = 0; i < trace.y[k].size(); ++i) {
                out += ',';
                append_double(out, trace.y[k][i]);
            }
            out += ',';
            append_double(out, trace.Ve[k]);
            out += ',';
            append_double(out, trace.Ul[k]);
            out += ',';
            append_double(out, trace.h2hat[k]);
        }
        out += '\n';
    }
    return out;
}

std::string trace_to_json(const Trace& trace) {
    nlohmann::json doc;
    doc["columns"] = column_names(trace);
    doc["samples"] = trace.samples();
    doc["terminated_by"] = trace.terminated_by;
    if (!trace.failure.empty()) doc["failure"] = trace.failure;
    doc["t"] = trace.t;

    const int nx = trace.state.empty() ? 0 : static_cast<int>(trace.state.front().size());
    std::vector<std::vector<double>> cols(nx);
    for (const Vec& x : trace.state)
        for (int i = 0; i < nx; ++i) cols[i].push_back(x[i]);
    doc["state"] = cols;

    if (!trace.u.empty()) {
        auto pack = [](const std::vector<Vec>& vs) {
            std::vector<std::vector<double>> out;
            if (vs.empty()) return out;
            out.resize(vs.front().size());
            for (const Vec& v : vs)
                for (int i = 0; i < v.size(); ++i) out[i].push_back(v[i]);
            return out;
        };
        doc["u"] = pack(trace.u);
        doc["y"] = pack(trace.y);
        doc["y_r"] = pack(trace.yr);
        doc["V_e"] = trace.Ve;
        doc["U_ell"] = trace.Ul;
        doc["h2hat"] = trace.h2hat;
    }
    if (!trace.events.empty()) {
        auto& ev = doc["events"];
        for (const auto& hit : trace.events)
            ev.push_back({{"name", hit.name},
                          {"time", hit.time},
                          {"sample", hit.sample},
                          {"stopped", hit.stopped}});
    }
    return doc.dump(2);
}

}  // namespace regul
