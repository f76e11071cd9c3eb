#pragma once

#include <functional>
#include <random>

#include "regul/types.hpp"

namespace regul {

using VectorFn = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(const Vec&)>;

/// Central-difference Jacobian of fn at point, perturbing one coordinate at
/// a time with step * (1 + |point|). Throws std::runtime_error identifying
/// the offending coordinate if an evaluation comes back non-finite.
Mat numerical_jacobian(const VectorFn& fn, const Vec& point, double step = 1e-6);

/// Central-difference gradient of a scalar function, same step policy.
Vec numerical_gradient(const ScalarFn& fn, const Vec& point, double step = 1e-6);

/// min/max eigenvalue of a symmetric matrix.
double sym_eig_min(const Mat& s);
double sym_eig_max(const Mat& s);

/// Smallest/largest singular values.
double sigma_min(const Mat& a);
double sigma_max(const Mat& a);

/// Solve a*x = b with the 2-norm condition number estimated on the side
/// (reported through *cond when non-null). Throws std::runtime_error when
/// a is numerically singular.
Vec solve_checked(const Mat& a, const Vec& b, double* cond = nullptr,
                  const std::string& context = "");
Mat solve_checked_mat(const Mat& a, const Mat& b, double* cond = nullptr,
                      const std::string& context = "");
Mat invert_checked(const Mat& a, const std::string& context = "");

/// Inverse square root of a symmetric positive definite matrix.
Mat spd_inverse_sqrt(const Mat& s);

bool is_finite(const Vec& v);

/// Deterministic uniform sampler over an axis-aligned box.
struct BoxSampler {
    Vec lo, hi;
    Vec operator()(std::mt19937_64& rng) const;
};

using Sampler = std::function<Vec(std::mt19937_64&)>;

Sampler make_box_sampler(const Vec& lo, const Vec& hi);

}  // namespace regul
