#include "regul/numeric.hpp"

#include <cmath>
#include <sstream>

namespace regul {

namespace {

void require_finite(const Vec& v, const char* what, int coord) {
    for (int i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            std::ostringstream msg;
            msg << what << ": non-finite value in output component " << i
                << " while perturbing coordinate " << coord;
            throw std::runtime_error(msg.str());
        }
    }
}

}  // namespace

Mat numerical_jacobian(const VectorFn& fn, const Vec& point, double step) {
    if (step <= 0.0) throw std::invalid_argument("numerical_jacobian: step must be > 0");
    const Vec f0 = fn(point);
    require_finite(f0, "numerical_jacobian", -1);
    const double h = step * (1.0 + point.norm());
    Mat jac(f0.size(), point.size());
    for (int j = 0; j < point.size(); ++j) {
        Vec xp = point, xm = point;
        xp[j] += h;
        xm[j] -= h;
        const Vec fp = fn(xp);
        const Vec fm = fn(xm);
        require_finite(fp, "numerical_jacobian", j);
        require_finite(fm, "numerical_jacobian", j);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

Vec numerical_gradient(const ScalarFn& fn, const Vec& point, double step) {
    VectorFn wrapped = [&fn](const Vec& x) {
        Vec out(1);
        out[0] = fn(x);
        return out;
    };
    Mat jac = numerical_jacobian(wrapped, point, step);
    return jac.row(0).transpose();
}

double sym_eig_min(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double sym_eig_max(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double sigma_min(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues().minCoeff();
}

double sigma_max(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues().maxCoeff();
}

namespace {

Mat solve_impl(const Mat& a, const Mat& b, double* cond, const std::string& context) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues().maxCoeff();
    const double smin = svd.singularValues().minCoeff();
    if (cond) *cond = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > smax * 1e-15) || smax == 0.0) {
        throw std::runtime_error("solve_checked: singular matrix" +
                                 (context.empty() ? "" : " (" + context + ")"));
    }
    return svd.solve(b);
}

}  // namespace

Vec solve_checked(const Mat& a, const Vec& b, double* cond, const std::string& context) {
    return solve_impl(a, b, cond, context);
}

Mat solve_checked_mat(const Mat& a, const Mat& b, double* cond, const std::string& context) {
    return solve_impl(a, b, cond, context);
}

Mat invert_checked(const Mat& a, const std::string& context) {
    return solve_impl(a, Mat::Identity(a.rows(), a.cols()), nullptr, context);
}

Mat spd_inverse_sqrt(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::runtime_error("spd_inverse_sqrt: matrix is not positive definite");
    return es.operatorInverseSqrt();
}

bool is_finite(const Vec& v) {
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

Vec BoxSampler::operator()(std::mt19937_64& rng) const {
    Vec out(lo.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < lo.size(); ++i) out[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return out;
}

Sampler make_box_sampler(const Vec& lo, const Vec& hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("make_box_sampler: bounds size mismatch");
    return BoxSampler{lo, hi};
}

}  // namespace regul
