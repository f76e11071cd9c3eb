#pragma once

#include <functional>
#include <string>
#include <vector>

#include "regul/regulator.hpp"
#include "regul/simulate.hpp"

namespace regul {

/// Non-increase check of a recorded diagnostic between consecutive samples,
/// with slack scaled by the local value: allowed increase is
/// slack * (1 + |value|).
enum class Diagnostic { Ve, Ul };

struct DecreaseVerdict {
    bool pass = false;
    double worst_violation = 0.0;
    double worst_time = 0.0;
    long compared = 0;
};

DecreaseVerdict lyapunov_decrease(const Trace& trace, Diagnostic which, double slack);

/// Least-squares slope of log U over the given samples. `converged` is set
/// when the window is empty (nothing left above the floor to fit).
struct RateFit {
    bool converged = false;
    double rate = 0.0;       // positive = decay
    double r_squared = 0.0;
    long points = 0;
};

RateFit fit_exponential_rate(const std::vector<double>& t, const std::vector<double>& u);

/// Trace-side fitter: extracts the requested diagnostic above `floor`,
/// optionally restricted to [t_a, t_b], then fits.
RateFit fit_contraction(const Trace& trace, Diagnostic which, double floor = 1e-16,
                        double t_a = -std::numeric_limits<double>::infinity(),
                        double t_b = std::numeric_limits<double>::infinity());

/// Damped Newton on an autonomous right-hand side, seeded from (typically)
/// the tail of a converged trace. Reports the numerical Jacobian spectrum
/// at the root for the exponential-stability verdict.
struct EquilibriumResult {
    bool converged = false;
    Vec point;
    double residual = std::numeric_limits<double>::infinity();
    CVec eigenvalues;
    double spectral_abscissa = std::numeric_limits<double>::infinity();
    bool exponentially_stable = false;  // all real parts <= -1e-8
    int iterations = 0;
};

EquilibriumResult find_equilibrium(const std::function<Vec(const Vec&)>& rhs, const Vec& seed,
                                   double newton_tol = 1e-10, int max_iter = 100);

/// One perturbation-magnitude row of a robustness sweep.
struct SweepRow {
    double delta = 0.0;
    bool trace_ok = false;
    bool stayed_in_compact = false;
    bool equilibrium_found = false;
    double regulated_norm = std::numeric_limits<double>::infinity();
    double spectral_abscissa = std::numeric_limits<double>::infinity();
    bool pass = false;
    std::string note;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double largest_passing_delta = -1.0;
    std::string to_csv() const;
    std::string to_json_string() const;
};

struct SweepChecks {
    double regulated_tol = 1e-6;
    double stability_margin = -1e-8;  // spectral abscissa must be <= this
    std::function<bool(const ClosedLoopState&)> in_compact;  // optional
};

/// For each delta: run the closed loop built by `loop_for`, Newton from the
/// trace tail, and record the regulated output plus the Jacobian spectrum.
/// Per-delta failures are rows, never throws. Rows are computed in parallel.
SweepResult robustness_sweep(const std::function<ClosedLoop(double)>& loop_for,
                             const std::vector<double>& deltas, const Vec& initial_state,
                             const IntegratorConfig& config, const SweepChecks& checks);

/// True iff every sample satisfies the predicate. An empty trace is
/// vacuously true (flagged through *warned when supplied).
bool invariance_check(const Trace& trace,
                      const std::function<bool(double, const Vec&)>& predicate,
                      bool* warned = nullptr);

}  // namespace regul
