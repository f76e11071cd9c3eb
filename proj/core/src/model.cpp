#include "regul/model.hpp"

#include <sstream>

namespace regul {

ControlAffineModel ControlAffineModel::create(int n, int m, int p,
                                              std::function<Vec(const Vec&)> f,
                                              std::function<Mat(const Vec&)> g,
                                              std::function<Vec(const Vec&)> h,
                                              std::vector<int> r_indices) {
    if (n <= 0 || m <= 0 || p <= 0)
        throw std::invalid_argument("ControlAffineModel: dimensions must be positive");
    const int r = static_cast<int>(r_indices.size());
    if (r > m)
        throw std::invalid_argument("ControlAffineModel: r <= m required");
    for (int idx : r_indices)
        if (idx < 0 || idx >= p)
            throw std::invalid_argument("ControlAffineModel: regulated index out of range");

    ControlAffineModel model;
    model.n = n;
    model.m = m;
    model.p = p;
    model.r = r;
    model.f = std::move(f);
    model.g = std::move(g);
    model.h = std::move(h);
    model.r_indices = std::move(r_indices);

    const Vec zero = Vec::Zero(n);
    const Vec f0 = model.f(zero);
    const Vec h0 = model.h(zero);
    if (f0.size() != n) throw std::invalid_argument("ControlAffineModel: f returns wrong size");
    if (h0.size() != p) throw std::invalid_argument("ControlAffineModel: h returns wrong size");
    if (f0.norm() > 1e-12)
        throw std::invalid_argument("ControlAffineModel: f(0) != 0 (|f(0)| = " +
                                    std::to_string(f0.norm()) + ")");
    if (h0.norm() > 1e-12)
        throw std::invalid_argument("ControlAffineModel: h(0) != 0 (|h(0)| = " +
                                    std::to_string(h0.norm()) + ")");
    const Mat g0 = model.g(zero);
    if (g0.rows() != n || g0.cols() != m)
        throw std::invalid_argument("ControlAffineModel: g(x) must be n x m");
    return model;
}

Vec ControlAffineModel::eval(const Vec& x, const Vec& u) const {
    if (x.size() != n || u.size() != m)
        throw std::invalid_argument("ControlAffineModel::eval: dimension mismatch");
    const Mat gx = g(x);
    if (gx.rows() != n || gx.cols() != m)
        throw std::invalid_argument("ControlAffineModel::eval: g(x) has wrong shape");
    return f(x) + gx * u;
}

Vec ControlAffineModel::pick_regulated(const Vec& y) const {
    Vec out(r);
    for (int i = 0; i < r; ++i) out[i] = y[r_indices[i]];
    return out;
}

Vec ControlAffineModel::h_r(const Vec& x) const { return pick_regulated(h(x)); }

Vec eval_model(const ControlAffineModel& model, const Vec& x, const Vec& u) {
    return model.eval(x, u);
}

ProcessModel ProcessModel::create(std::function<Vec(const Vec&, const Vec&)> xi,
                                  std::function<Vec(const Vec&, const Vec&)> zeta,
                                  const ControlAffineModel& base) {
    ProcessModel proc;
    proc.n = base.n;
    proc.m = base.m;
    proc.p = base.p;
    proc.xi = std::move(xi);
    proc.zeta = std::move(zeta);
    proc.base = base;
    proc.r_indices = base.r_indices;
    const Vec zero_x = Vec::Zero(base.n), zero_u = Vec::Zero(base.m);
    if (proc.zeta(zero_x, zero_u).size() != base.p)
        throw std::invalid_argument("ProcessModel: output dimension does not match base model");
    return proc;
}

ProcessModel ProcessModel::from_model(const ControlAffineModel& model) {
    auto xi = [model](const Vec& x, const Vec& u) { return model.eval(x, u); };
    auto zeta = [model](const Vec& x, const Vec&) { return model.h(x); };
    return create(std::move(xi), std::move(zeta), model);
}

Vec ProcessModel::zeta_r(const Vec& x, const Vec& u) const {
    const Vec y = zeta(x, u);
    Vec out(static_cast<int>(r_indices.size()));
    for (std::size_t i = 0; i < r_indices.size(); ++i) out[i] = y[r_indices[i]];
    return out;
}

DiscrepancyReport discrepancy(const ControlAffineModel& model, const ProcessModel& process,
                              const Sampler& region_sampler, const Sampler& input_sampler,
                              int order, long n_samples, std::uint64_t seed,
                              std::string region_description) {
    if (n_samples <= 0) throw std::invalid_argument("discrepancy: empty sample set");
    if (order != 0 && order != 1) throw std::invalid_argument("discrepancy: order must be 0 or 1");

    std::mt19937_64 rng(seed);
    DiscrepancyReport report;
    report.region = std::move(region_description);

    for (long s = 0; s < n_samples; ++s) {
        const Vec x = region_sampler(rng);
        const Vec u = input_sampler(rng);

        const Vec dyn_gap = process.xi(x, u) - model.eval(x, u);
        const Vec out_gap = process.zeta(x, u) - model.h(x);
        report.c0_gap = std::max(report.c0_gap, dyn_gap.norm() + out_gap.norm());

        if (order == 1) {
            // Jacobian-difference block matrix, assembled by differentiating
            // the gap maps themselves (exactly zero when process == model).
            // The model's lower-right block is zero since h has no direct
            // input dependence.
            const Mat gx = model.g(x);
            Mat block(model.n + model.p, model.n + model.m);
            block.topLeftCorner(model.n, model.n) = numerical_jacobian(
                [&](const Vec& xx) { return Vec(process.xi(xx, u) - model.eval(xx, u)); }, x);
            block.topRightCorner(model.n, model.m) = numerical_jacobian(
                [&](const Vec& uu) { return Vec(process.xi(x, uu) - gx * uu); }, u);
            block.bottomLeftCorner(model.p, model.n) = numerical_jacobian(
                [&](const Vec& xx) { return Vec(process.zeta(xx, u) - model.h(xx)); }, x);
            block.bottomRightCorner(model.p, model.m) = numerical_jacobian(
                [&](const Vec& uu) { return process.zeta(x, uu); }, u);
            report.c1_gap = std::max(report.c1_gap, block.norm());
        }
        ++report.sample_count;
    }
    return report;
}

NonResonanceResult check_nonresonance(const ControlAffineModel& model, double rel_tol) {
    const Vec zero = Vec::Zero(model.n);
    const Mat df = numerical_jacobian(model.f, zero);
    const Mat dhr = numerical_jacobian([&](const Vec& x) { return model.h_r(x); }, zero);
    const Mat g0 = model.g(zero);

    Mat pencil(model.n + model.r, model.n + model.m);
    pencil.topLeftCorner(model.n, model.n) = df;
    pencil.topRightCorner(model.n, model.m) = g0;
    pencil.bottomLeftCorner(model.r, model.n) = dhr;
    pencil.bottomRightCorner(model.r, model.m).setZero();

    Eigen::JacobiSVD<Mat> svd(pencil);
    NonResonanceResult res;
    res.sigma_max = svd.singularValues().maxCoeff();
    res.sigma_min = svd.singularValues().minCoeff();
    res.ok = res.sigma_min > rel_tol * res.sigma_max;
    return res;
}

}  // namespace regul
