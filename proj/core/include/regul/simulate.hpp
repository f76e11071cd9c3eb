#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "regul/types.hpp"

namespace regul {

struct IntegratorConfig {
    enum class Method { rk4, rk45 };
    Method method = Method::rk4;
    double dt = 1e-3;        // fixed-step size (rk4); initial step (rk45)
    double rtol = 1e-8;      // rk45 only
    double atol = 1e-10;     // rk45 only
    double t0 = 0.0;
    double t_end = 1.0;
    long max_steps = 50'000'000;
    double record_every = 0.0;  // 0: record every accepted step
};

/// Per-sample diagnostics supplied by the closed-loop composition.
struct StepDiagnostics {
    Vec u, y, yr;
    double Ve = std::numeric_limits<double>::quiet_NaN();
    double Ul = std::numeric_limits<double>::quiet_NaN();
    double h2hat = std::numeric_limits<double>::quiet_NaN();
    bool sat_active = false;
};

using Rhs = std::function<Vec(double t, const Vec&)>;
using Probe = std::function<StepDiagnostics(double t, const Vec&)>;
using EventPredicate = std::function<bool(double t, const Vec&)>;

/// Set-exit / condition detectors, evaluated on each accepted sample
/// (sample-and-hold; no root polishing).
class EventSet {
  public:
    enum class Action { stop, flag };
    int register_event(EventPredicate predicate, Action action, std::string name);
    struct Entry {
        EventPredicate predicate;
        Action action;
        std::string name;
    };
    const std::vector<Entry>& entries() const { return entries_; }

  private:
    std::vector<Entry> entries_;
};

struct Trace {
    std::vector<double> t;
    std::vector<Vec> state;
    std::vector<Vec> u, y, yr;
    std::vector<double> Ve, Ul, h2hat;
    std::vector<std::uint8_t> sat_active;
    std::vector<std::string> state_names;  // optional CSV header names

    struct EventHit {
        std::string name;
        double time = 0.0;
        long sample = 0;
        bool stopped = false;
    };
    std::vector<EventHit> events;

    std::string terminated_by;  // "t_end" | "max_steps" | "event:<name>" | "error"
    std::string failure;        // non-empty iff terminated_by == "error"

    bool ok() const { return failure.empty(); }
    long samples() const { return static_cast<long>(t.size()); }
    const Vec& last_state() const { return state.back(); }
};

Trace integrate(const Rhs& rhs, const Vec& x0, const IntegratorConfig& config,
                const Probe& probe = nullptr, const EventSet& events = {});

/// One row per sample; header derived from state_names (x0.. fallback) and
/// the recorded diagnostics, in the order
/// t, x..., z..., xhat..., u..., y..., V_e, U_ell, h2hat.
std::string trace_to_csv(const Trace& trace);

/// Metadata + column arrays as a JSON document (serialized).
std::string trace_to_json(const Trace& trace);

}  // namespace regul
