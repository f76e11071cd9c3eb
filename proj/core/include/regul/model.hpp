#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "regul/numeric.hpp"
#include "regul/types.hpp"

namespace regul {

/// Design model: dx/dt = f(x) + g(x) u, y = h(x), with the regulated block
/// y_r = components r_indices of y. All maps must be pure; the object is
/// immutable after construction and safe to share across threads.
struct ControlAffineModel {
    int n = 0;  ///< state dimension
    int m = 0;  ///< input dimension
    int p = 0;  ///< output dimension
    int r = 0;  ///< regulated-output dimension (r <= m)

    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> g;
    std::function<Vec(const Vec&)> h;
    std::vector<int> r_indices;

    /// Validates f(0) = 0 and h(0) = 0 to 1e-12, r <= m, g(0) shape n x m.
    static ControlAffineModel create(int n, int m, int p,
                                     std::function<Vec(const Vec&)> f,
                                     std::function<Mat(const Vec&)> g,
                                     std::function<Vec(const Vec&)> h,
                                     std::vector<int> r_indices);

    Vec eval(const Vec& x, const Vec& u) const;  ///< f(x) + g(x) u
    Vec h_r(const Vec& x) const;
    Vec pick_regulated(const Vec& y) const;
};

/// eval_model(model, x, u) = f(x) + g(x) u with dimension checks.
Vec eval_model(const ControlAffineModel& model, const Vec& x, const Vec& u);

/// The true plant: dx/dt = xi(x, u), y = zeta(x, u). `base` carries the
/// design model it approximates so discrepancy reports and the regulated
/// output split are available.
struct ProcessModel {
    int n = 0, m = 0, p = 0;
    std::function<Vec(const Vec&, const Vec&)> xi;
    std::function<Vec(const Vec&, const Vec&)> zeta;
    std::optional<ControlAffineModel> base;
    std::vector<int> r_indices;

    static ProcessModel create(std::function<Vec(const Vec&, const Vec&)> xi,
                               std::function<Vec(const Vec&, const Vec&)> zeta,
                               const ControlAffineModel& base);
    /// The process that coincides with the model exactly.
    static ProcessModel from_model(const ControlAffineModel& model);

    Vec zeta_r(const Vec& x, const Vec& u) const;
};

/// Sampled supremum of the open-loop model/process mismatch.
///   order 0: sup |xi - (f + g u)| + |zeta - h|
///   order 1: additionally the sup Frobenius norm of the Jacobian-difference
///            block matrix (state and input derivatives of both maps).
struct DiscrepancyReport {
    double c0_gap = 0.0;
    double c1_gap = 0.0;
    long sample_count = 0;
    std::string region;
};

DiscrepancyReport discrepancy(const ControlAffineModel& model, const ProcessModel& process,
                              const Sampler& region_sampler, const Sampler& input_sampler,
                              int order, long n_samples, std::uint64_t seed,
                              std::string region_description = "");

/// Full-row-rank test of [[df/dx(0), g(0)], [dh_r/dx(0), 0]]: rules out a
/// transmission zero at the origin. The threshold is relative to the largest
/// singular value.
struct NonResonanceResult {
    bool ok = false;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

NonResonanceResult check_nonresonance(const ControlAffineModel& model, double rel_tol = 1e-8);

}  // namespace regul
