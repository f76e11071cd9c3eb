#pragma once

#include <functional>
#include <string>
#include <vector>

#include "regul/aircraft.hpp"
#include "regul/regulator.hpp"

namespace regul {

/// Everything a scenario needs for one named system: design model, the
/// extended-state feedback, integral action, observer chart + barrier,
/// perturbation families, coordinate maps for IO, and default sampling
/// regions. Built-ins: "aircraft" and "double-integrator".
struct ModelBundle {
    std::string name;
    ControlAffineModel model;
    StateFeedback feedback;
    std::optional<ForwardingDesign> design;  // absent for hand-built feedbacks
    IntegralAction ia;
    std::optional<ObserverChart> chart;
    std::optional<BarrierOutput> barrier;
    std::function<ProcessModel(const std::string&, double)> process_family;

    std::function<Vec(const Vec&)> to_internal;    // physical -> model coordinates
    std::function<Vec(const Vec&)> from_internal;  // model -> physical coordinates
    std::vector<std::string> state_names;          // physical names, size n
    Sampler xz_sampler;                            // levels sampler over S x z-box
    std::function<bool(const Vec&)> outside_protected;
    std::function<bool(const ClosedLoopState&)> in_compact;  // declared envelope
    Vec default_initial;                           // physical coordinates
};

/// Thrown for unknown names so the CLI can distinguish reference errors.
ModelBundle make_bundle(const std::string& name);

std::vector<std::string> registered_models();

/// zbar must cover the integrator cross-term over the saturated estimate
/// ball (|H| can reach ~1.3e3 at the x-saturation radius), otherwise the
/// anti-windup leak reacts to observer peaking transients.
ModelBundle make_aircraft_bundle(const aircraft::Params& params, double omega = 5.0,
                                 double zbar = 2500.0);
/// The forwarding variant is configurable; only the linearized cross-term
/// forms (c, c_teel) have closed-form data for this plant.
ModelBundle make_double_integrator_bundle(ForwardingVariant variant = ForwardingVariant::c);

}  // namespace regul
