#include "regul/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace regul {

using nlohmann::json;

namespace {

json parse_config(const std::string& text) {
    try {
        return json::parse(text,
                           /*cb=*/nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& ex) {
        throw config_error(std::string("config parse error: ") + ex.what());
    }
}

aircraft::Params aircraft_params_from(const json& overrides) {
    aircraft::Params p;
    auto get = [&](const char* key, double& slot) {
        if (overrides.contains(key)) slot = overrides.at(key).get<double>();
    };
    get("g", p.g);
    get("pounds", p.pounds);
    get("v0", p.v0);
    get("k1", p.k1);
    get("k2", p.k2);
    get("k3", p.k3);
    get("k4", p.k4);
    get("k_e", p.k_e);
    get("k_q", p.k_q);
    get("eps1", p.eps1);
    get("eps2", p.eps2);
    get("eps3", p.eps3);
    get("eps4", p.eps4);
    get("eps5", p.eps5);
    get("gamma_dot_max", p.gamma_dot_max);
    get("delta_floor", p.delta_floor);
    get("delta_width", p.delta_width);
    get("v_cap", p.v_cap);
    get("v_cap_width", p.v_cap_width);
    get("sing_tol", p.sing_tol);
    get("nu", p.nu);
    get("nu_k", p.nu_k);
    return p;
}

Vec vec_from(const json& arr) {
    Vec out(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) out[i] = arr.at(i).get<double>();
    return out;
}

IntegratorConfig integrator_from(const json& cfg) {
    IntegratorConfig ic;
    if (cfg.contains("integrator")) {
        const json& j = cfg.at("integrator");
        if (j.contains("method")) {
            const std::string m = j.at("method").get<std::string>();
            if (m == "rk4")
                ic.method = IntegratorConfig::Method::rk4;
            else if (m == "rk45")
                ic.method = IntegratorConfig::Method::rk45;
            else
                throw config_error("unknown integrator method '" + m + "'");
        }
        if (j.contains("dt")) ic.dt = j.at("dt").get<double>();
        if (j.contains("rtol")) ic.rtol = j.at("rtol").get<double>();
        if (j.contains("atol")) ic.atol = j.at("atol").get<double>();
        if (j.contains("t_end")) ic.t_end = j.at("t_end").get<double>();
        if (j.contains("max_steps")) ic.max_steps = j.at("max_steps").get<long>();
        if (j.contains("record_every")) ic.record_every = j.at("record_every").get<double>();
    }
    return ic;
}

struct Assembled {
    ModelBundle bundle;
    ClosedLoop loop;
    bool zero_feedback = false;
};

Assembled assemble(const json& cfg, std::uint64_t seed) {
    if (!cfg.contains("model")) throw config_error("config missing 'model'");
    const std::string model_name = cfg.at("model").get<std::string>();

    ModelBundle bundle = [&] {
        double omega = 5.0, zbar = 600.0;
        if (cfg.contains("design")) {
            const json& d = cfg.at("design");
            if (d.contains("omega")) omega = d.at("omega").get<double>();
            if (d.contains("zbar")) zbar = d.at("zbar").get<double>();
        }
        if (model_name == "aircraft") {
            aircraft::Params p =
                aircraft_params_from(cfg.contains("params") ? cfg.at("params") : json::object());
            return make_aircraft_bundle(p, omega, zbar);
        }
        if (model_name == "double-integrator") {
            ForwardingVariant variant = ForwardingVariant::c;
            if (cfg.contains("design") && cfg.at("design").contains("variant")) {
                const std::string v = cfg.at("design").at("variant").get<std::string>();
                if (v == "c")
                    variant = ForwardingVariant::c;
                else if (v == "c-teel")
                    variant = ForwardingVariant::c_teel;
                else
                    throw config_error("unknown forwarding variant '" + v + "'");
            }
            ModelBundle b = make_double_integrator_bundle(variant);
            b.ia.omega = omega;
            b.ia.zbar = zbar;
            return b;
        }
        throw config_error("unknown model '" + model_name + "'");
    }();

    Assembled out{std::move(bundle), {}, false};

    ClosedLoop& loop = out.loop;
    loop.model = out.bundle.model;
    loop.feedback = out.bundle.feedback;
    loop.ia = out.bundle.ia;

    if (cfg.contains("feedback") && cfg.at("feedback").get<std::string>() == "zero") {
        out.zero_feedback = true;
        const int m = loop.model.m;
        loop.feedback.psi = [m](const Vec&, const Vec&) { return Vec(Vec::Zero(m)); };
    }

    if (cfg.contains("process")) {
        const json& pr = cfg.at("process");
        loop.process = out.bundle.process_family(pr.at("family").get<std::string>(),
                                                 pr.at("delta").get<double>());
    }

    const std::string mode =
        cfg.contains("mode") ? cfg.at("mode").get<std::string>() : "output-feedback";
    if (mode == "output-feedback") {
        if (!out.bundle.chart) throw config_error("model has no observer chart");
        loop.chart = out.bundle.chart;
        bool use_barrier = true;
        if (cfg.contains("observer")) {
            const json& ob = cfg.at("observer");
            if (ob.contains("ell")) loop.ell = ob.at("ell").get<double>();
            if (ob.contains("tau_margin")) loop.tau_margin = ob.at("tau_margin").get<double>();
            if (ob.contains("barrier")) use_barrier = ob.at("barrier").get<bool>();
        }
        if (use_barrier && out.bundle.barrier) loop.barrier = out.bundle.barrier;
    } else if (mode != "state-feedback") {
        throw config_error("unknown mode '" + mode + "'");
    }

    // Saturation levels: explicit or estimated from the sampled sublevel set.
    LevelSetOptions opts;
    opts.seed = seed;
    bool explicit_levels = false;
    if (cfg.contains("levels")) {
        const json& lv = cfg.at("levels");
        if (lv.contains("mu") && lv.contains("xbar")) {
            loop.levels.mu = lv.at("mu").get<double>();
            loop.levels.xbar = lv.at("xbar").get<double>();
            loop.levels.varsigma = loop.ia.varsigma;
            if (lv.contains("v1")) loop.levels.v1 = lv.at("v1").get<double>();
            if (lv.contains("v2")) loop.levels.v2 = lv.at("v2").get<double>();
            explicit_levels = true;
        } else {
            if (lv.contains("samples")) opts.n_samples = lv.at("samples").get<long>();
            if (lv.contains("v1_fraction")) opts.v1_fraction = lv.at("v1_fraction").get<double>();
            if (lv.contains("v2_fraction")) opts.v2_fraction = lv.at("v2_fraction").get<double>();
            if (lv.contains("v2_override")) opts.v2_override = lv.at("v2_override").get<double>();
        }
    }
    if (!explicit_levels && !out.zero_feedback) {
        loop.levels = estimate_level_sets(out.bundle.feedback, out.bundle.outside_protected,
                                          out.bundle.xz_sampler, loop.model.n, opts);
        loop.levels.varsigma = loop.ia.varsigma;
    }
    return out;
}

Vec initial_state_from(const json& cfg, const Assembled& assembled) {
    const ModelBundle& bundle = assembled.bundle;
    const ClosedLoop& loop = assembled.loop;
    Vec x_physical = bundle.default_initial;
    Vec z = Vec::Zero(loop.r());
    std::optional<Vec> xhat_physical;
    double xhat_offset = 0.05;

    if (cfg.contains("initial")) {
        const json& init = cfg.at("initial");
        if (init.contains("x")) x_physical = vec_from(init.at("x"));
        if (init.contains("x_trim_offset"))
            x_physical = bundle.from_internal(Vec::Zero(loop.model.n)) +
                         vec_from(init.at("x_trim_offset"));
        if (init.contains("z")) z = vec_from(init.at("z"));
        if (init.contains("xhat")) xhat_physical = vec_from(init.at("xhat"));
        if (init.contains("xhat_offset_fraction"))
            xhat_offset = init.at("xhat_offset_fraction").get<double>();
    }

    ClosedLoopState s;
    s.x = bundle.to_internal(x_physical);
    s.z = z;
    if (loop.has_observer()) {
        if (xhat_physical)
            s.xhat = bundle.to_internal(*xhat_physical);
        else
            s.xhat = bundle.to_internal(Vec((1.0 + xhat_offset) * x_physical));
    } else {
        s.xhat = Vec(0);
    }
    return s.pack();
}

Trace presentation_trace(const Trace& internal, const Assembled& assembled) {
    const ClosedLoop& loop = assembled.loop;
    Trace out = internal;
    const int n = loop.n();
    for (Vec& s : out.state) {
        Vec conv = s;
        conv.head(n) = assembled.bundle.from_internal(s.head(n));
        if (loop.has_observer()) conv.tail(n) = assembled.bundle.from_internal(s.tail(n));
        s = std::move(conv);
    }
    out.state_names.clear();
    for (const auto& nm : assembled.bundle.state_names) out.state_names.push_back(nm);
    for (int i = 0; i < loop.r(); ++i) out.state_names.push_back("z" + std::to_string(i));
    if (loop.has_observer())
        for (const auto& nm : assembled.bundle.state_names)
            out.state_names.push_back(nm + "hat");
    return out;
}

CheckOutcome run_check(const json& chk, const Assembled& assembled, const Trace& internal_trace,
                       const Trace& physical_trace) {
    const ClosedLoop& loop = assembled.loop;
    const std::string type = chk.at("type").get<std::string>();
    CheckOutcome out;
    out.name = chk.contains("name") ? chk.at("name").get<std::string>() : type;
    std::ostringstream detail;

    if (type == "terminal-regulated") {
        const double tol = chk.at("tol").get<double>();
        const double val = internal_trace.yr.back().norm();
        out.pass = internal_trace.ok() && val <= tol;
        detail << "|y_r(T)| = " << val << " (tol " << tol << ")";
    } else if (type == "terminal-state") {
        const int index = chk.at("index").get<int>();
        const double target = chk.at("target").get<double>();
        const double tol = chk.at("tol").get<double>();
        const bool relative = chk.value("relative", false);
        const double val = physical_trace.state.back()[index];
        const double err = relative ? std::abs(val - target) / std::abs(target)
                                    : std::abs(val - target);
        out.pass = internal_trace.ok() && err <= tol;
        detail << "state[" << index << "](T) = " << val << ", error " << err << " (tol " << tol
               << ")";
    } else if (type == "lyapunov-decrease" || type == "lyapunov-increase-expected") {
        const Diagnostic which =
            chk.value("which", std::string("Ve")) == "Ul" ? Diagnostic::Ul : Diagnostic::Ve;
        const double slack = chk.value("slack", 1e-6);
        const DecreaseVerdict verdict = lyapunov_decrease(internal_trace, which, slack);
        if (type == "lyapunov-decrease") {
            out.pass = internal_trace.ok() && verdict.pass;
            detail << "worst violation " << verdict.worst_violation << " at t="
                   << verdict.worst_time;
        } else {
            out.pass = !verdict.pass;
            detail << (verdict.pass ? "unexpectedly monotone"
                                    : "increase located at t=" + std::to_string(verdict.worst_time));
        }
    } else if (type == "equilibrium") {
        const double newton_tol = chk.value("newton_tol", 1e-10);
        const double regulated_tol = chk.value("regulated_tol", 1e-8);
        const bool require_stable = chk.value("require_stable", true);
        const double margin = chk.value("stability_margin", -1e-8);
        auto rhs_fn = [&loop](const Vec& s) { return loop.rhs(s); };
        const EquilibriumResult eq =
            find_equilibrium(rhs_fn, internal_trace.last_state(), newton_tol);
        if (!eq.converged) {
            out.pass = false;
            detail << "newton residual " << eq.residual;
        } else {
            const auto cls =
                ClosedLoopState::unpack(eq.point, loop.n(), loop.r(), loop.has_observer());
            const Vec u = loop.control(cls);
            const double reg = loop.regulated_output(cls.x, u).norm();
            const bool stable = eq.spectral_abscissa <= margin;
            out.pass = reg <= regulated_tol && (!require_stable || stable);
            detail << "|zeta_r(eq)| = " << reg << ", spectral abscissa = "
                   << eq.spectral_abscissa;
        }
    } else if (type == "invariance" || type == "escape-expected") {
        const std::string set = chk.at("set").get<std::string>();
        std::function<bool(double, const Vec&)> inside;
        if (set == "h2") {
            const double level = chk.value("level", 0.5);
            const double slack = chk.value("slack", 1e-6);
            if (!assembled.bundle.barrier) throw config_error("invariance: no barrier available");
            const auto barrier = *assembled.bundle.barrier;
            const int n = loop.n();
            const bool has_obs = loop.has_observer();
            const int r = loop.r();
            inside = [barrier, level, slack, n, r, has_obs](double, const Vec& s) {
                const auto cls = ClosedLoopState::unpack(s, n, r, has_obs);
                return barrier.value(cls.xhat) <= level + slack;
            };
        } else if (set == "domain") {
            if (!assembled.bundle.chart) throw config_error("invariance: no chart available");
            const auto in_domain = assembled.bundle.chart->in_domain;
            const int n = loop.n();
            const bool has_obs = loop.has_observer();
            const int r = loop.r();
            inside = [in_domain, n, r, has_obs](double, const Vec& s) {
                const auto cls = ClosedLoopState::unpack(s, n, r, has_obs);
                return in_domain(cls.xhat);
            };
        } else {
            throw config_error("invariance: unknown set '" + set + "'");
        }
        bool warned = false;
        const bool invariant = invariance_check(internal_trace, inside, &warned);
        if (type == "invariance") {
            out.pass = internal_trace.ok() && invariant;
            detail << (invariant ? "all samples inside" : "escape detected");
        } else {
            out.pass = !invariant;
            detail << (invariant ? "unexpectedly stayed inside" : "escape detected as expected");
        }
        if (warned) detail << " (empty trace: vacuous)";
    } else if (type == "input-bound") {
        const double slack = chk.value("slack", 1e-9);
        double worst = 0.0;
        for (const Vec& u : internal_trace.u) worst = std::max(worst, u.cwiseAbs().maxCoeff());
        out.pass = internal_trace.ok() && worst <= loop.levels.mu + slack;
        detail << "max |u_i| = " << worst << " (mu = " << loop.levels.mu << ")";
    } else if (type == "input-pinned") {
        const int index = chk.at("index").get<int>();
        const double min_mag = chk.at("min_magnitude").get<double>();
        const double until = chk.at("until").get<double>();
        bool pinned = true;
        for (long k = 0; k < internal_trace.samples(); ++k) {
            if (internal_trace.t[k] > until) break;
            if (std::abs(internal_trace.u[k][index]) < min_mag) {
                pinned = false;
                detail << "unpinned at t=" << internal_trace.t[k] << "; ";
                break;
            }
        }
        out.pass = internal_trace.ok() && pinned;
        detail << (pinned ? "input held at saturation over the window" : "");
    } else if (type == "windup-bound") {
        const double slack = chk.value("slack", 1e-6);
        const double bound = loop.ia.zbar * (1.0 + loop.ia.varsigma) + slack;
        double worst = 0.0;
        const int n = loop.n();
        const int r = loop.r();
        for (const Vec& s : internal_trace.state) {
            const auto cls = ClosedLoopState::unpack(s, n, r, loop.has_observer());
            const Vec arg = cls.z + loop.ia.H_windup(cls.x);
            worst = std::max(worst, arg.cwiseAbs().maxCoeff());
        }
        out.pass = internal_trace.ok() && worst <= bound;
        detail << "max |z + H(x)| = " << worst << " (bound " << bound << ")";
    } else if (type == "trace-ok") {
        out.pass = internal_trace.ok() && internal_trace.terminated_by == "t_end";
        detail << internal_trace.terminated_by;
        if (!internal_trace.failure.empty()) detail << ": " << internal_trace.failure;
    } else {
        throw config_error("unknown check type '" + type + "'");
    }
    out.detail = detail.str();
    return out;
}

}  // namespace

ScenarioResult run_scenario(const std::string& config_text, std::uint64_t seed_override,
                            bool has_seed_override, bool check_only) {
    const json cfg = parse_config(config_text);
    const std::uint64_t seed = has_seed_override
                                   ? seed_override
                                   : (cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                                           : 1ull);

    Assembled assembled = assemble(cfg, seed);
    ScenarioResult result;
    result.levels = assembled.loop.levels;

    // Chart/design verification reports (always produced).
    {
        const ModelBundle& bundle = assembled.bundle;
        std::vector<double> ladder = {1.0, 2.0, 5.0, 10.0, 50.0};
        if (cfg.contains("observer") && cfg.at("observer").contains("ladder"))
            ladder = cfg.at("observer").at("ladder").get<std::vector<double>>();
        if (bundle.chart) {
            Sampler state_sampler = [sampler = bundle.xz_sampler,
                                     n = bundle.model.n](std::mt19937_64& rng) {
                return Vec(sampler(rng).head(n));
            };
            Vec ulo = Vec::Constant(bundle.model.m, -1.0);
            Vec uhi = Vec::Constant(bundle.model.m, 1.0);
            result.chart_report = verify_chart(*bundle.chart, bundle.model, ladder, state_sampler,
                                               make_box_sampler(ulo, uhi), 200, seed);
        }
        Sampler state_sampler = [sampler = bundle.xz_sampler,
                                 n = bundle.model.n](std::mt19937_64& rng) {
            return Vec(sampler(rng).head(n));
        };
        result.design_report =
            verify_design(bundle.design ? &*bundle.design : nullptr, bundle.model, bundle.ia,
                          state_sampler, 100, seed);
    }

    if (check_only) {
        result.all_pass = result.chart_report.all_pass && result.design_report.ok;
        json verdicts;
        verdicts["mode"] = "check-only";
        verdicts["chart_ok"] = result.chart_report.all_pass;
        verdicts["design_ok"] = result.design_report.ok;
        verdicts["all_pass"] = result.all_pass;
        result.verdicts_json = verdicts.dump(2);
        return result;
    }

    const IntegratorConfig ic = integrator_from(cfg);
    Trace internal_trace;

    if (cfg.contains("sweep")) {
        const json& sw = cfg.at("sweep");
        const std::string family = sw.at("family").get<std::string>();
        const std::vector<double> deltas = sw.at("deltas").get<std::vector<double>>();
        SweepChecks checks;
        checks.regulated_tol = sw.value("regulated_tol", 1e-6);
        checks.stability_margin = sw.value("stability_margin", -1e-8);
        if (sw.value("compact", true)) checks.in_compact = assembled.bundle.in_compact;

        auto loop_for = [&assembled, family](double delta) {
            ClosedLoop loop = assembled.loop;
            if (delta != 0.0)
                loop.process = assembled.bundle.process_family(family, delta);
            else
                loop.process.reset();
            return loop;
        };
        const Vec x0 = initial_state_from(cfg, assembled);
        result.sweep = robustness_sweep(loop_for, deltas, x0, ic, checks);
    } else {
        const Vec x0 = initial_state_from(cfg, assembled);
        internal_trace = integrate(assembled.loop.as_rhs(), x0, ic, assembled.loop.probe());
        result.trace = presentation_trace(internal_trace, assembled);
    }

    bool all = true;
    if (cfg.contains("checks")) {
        for (const json& chk : cfg.at("checks")) {
            if (chk.at("type") == "sweep-largest-delta") {
                CheckOutcome out;
                out.name = "sweep-largest-delta";
                if (!result.sweep) throw config_error("sweep check without a sweep section");
                const double at_least = chk.value("at_least", 0.0);
                const double expect_fail_at = chk.value("expect_fail_at", -1.0);
                out.pass = result.sweep->largest_passing_delta >= at_least;
                if (expect_fail_at >= 0.0) {
                    bool failed_row = false;
                    for (const auto& row : result.sweep->rows)
                        if (std::abs(row.delta - expect_fail_at) < 1e-12 && !row.pass)
                            failed_row = true;
                    out.pass = out.pass && failed_row;
                }
                std::ostringstream d;
                d << "largest passing delta = " << result.sweep->largest_passing_delta;
                out.detail = d.str();
                all = all && out.pass;
                result.checks.push_back(std::move(out));
                continue;
            }
            CheckOutcome out = run_check(chk, assembled, internal_trace, result.trace);
            all = all && out.pass;
            result.checks.push_back(std::move(out));
        }
    }
    result.all_pass = all;

    json verdicts;
    verdicts["all_pass"] = result.all_pass;
    verdicts["levels"] = {{"v_infty", result.levels.v_infty}, {"v1", result.levels.v1},
                          {"v2", result.levels.v2},           {"mu", result.levels.mu},
                          {"xbar", result.levels.xbar}};
    for (const auto& chk : result.checks)
        verdicts["checks"].push_back({{"name", chk.name}, {"pass", chk.pass},
                                      {"detail", chk.detail}});
    result.verdicts_json = verdicts.dump(2);
    return result;
}

ScenarioResult run_scenario_file(const std::string& config_path,
                                 std::optional<std::uint64_t> seed_override, bool check_only) {
    std::ifstream in(config_path);
    if (!in) throw config_error("cannot open config file '" + config_path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_scenario(buffer.str(), seed_override.value_or(0), seed_override.has_value(),
                        check_only);
}

void write_artifacts(const ScenarioResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto dump = [&](const std::string& name, const std::string& text) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        f << text;
    };
    if (result.trace.samples() > 0) {
        dump("trace.csv", trace_to_csv(result.trace));
        dump("trace.json", trace_to_json(result.trace));
    }
    if (result.sweep) {
        dump("sweep.csv", result.sweep->to_csv());
        dump("sweep.json", result.sweep->to_json_string());
    }
    dump("chart_report.json", result.chart_report.to_json_string());
    {
        nlohmann::json d;
        d["h_residual_max"] = result.design_report.h_residual_max;
        d["upsilon_min"] = result.design_report.upsilon_min;
        d["k_zero_max"] = result.design_report.k_zero_max;
        d["k_slope_zero_max"] = result.design_report.k_slope_zero_max;
        d["lipschitz_excess"] = result.design_report.lipschitz_excess;
        d["ok"] = result.design_report.ok;
        dump("design_report.json", d.dump(2));
    }
    dump("verdicts.json", result.verdicts_json);
}

}  // namespace regul
