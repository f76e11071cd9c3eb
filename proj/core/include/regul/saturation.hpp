#pragma once

#include <cmath>

#include "regul/types.hpp"

namespace regul {

/// C1 saturation bounded by `level`, exact identity for |s| <= level/(1+margin).
/// Between the identity zone and level*(1+margin) the function is a cubic
/// Hermite blend that reaches the bound with zero slope, and it is constant
/// beyond. Monotone for margin <= 1.
struct SmoothSaturation {
    double level;
    double margin = 0.05;

    SmoothSaturation(double level_, double margin_ = 0.05) : level(level_), margin(margin_) {
        if (!(level > 0.0)) throw std::invalid_argument("SmoothSaturation: level must be > 0");
        if (!(margin > 0.0 && margin <= 1.0))
            throw std::invalid_argument("SmoothSaturation: margin must be in (0, 1]");
    }

    double dead_zone() const { return level / (1.0 + margin); }

    double operator()(double s) const {
        const double a = dead_zone();
        const double m = std::abs(s);
        if (m <= a) return s;
        const double b = level * (1.0 + margin);
        const double sign = (s < 0.0) ? -1.0 : 1.0;
        if (m >= b) return sign * level;
        // Hermite on [a, b]: value a, slope 1 at a; value `level`, slope 0 at b.
        const double w = b - a;
        const double t = (m - a) / w;
        const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        const double h10 = t * (1.0 - t) * (1.0 - t);
        const double h01 = t * t * (3.0 - 2.0 * t);
        return sign * (h00 * a + h10 * w + h01 * level);
    }

    double derivative(double s) const {
        const double a = dead_zone();
        const double m = std::abs(s);
        if (m <= a) return 1.0;
        const double b = level * (1.0 + margin);
        if (m >= b) return 0.0;
        const double w = b - a;
        const double t = (m - a) / w;
        const double dh00 = 6.0 * t * (t - 1.0);
        const double dh10 = (1.0 - t) * (1.0 - 3.0 * t);
        const double dh01 = 6.0 * t * (1.0 - t);
        return (dh00 * a / w) + dh10 + dh01 * level / w;
    }

    Vec operator()(const Vec& s) const {
        Vec out(s.size());
        for (int i = 0; i < s.size(); ++i) out[i] = (*this)(s[i]);
        return out;
    }
};

inline double smooth_sat(double s, const SmoothSaturation& sat) { return sat(s); }
inline Vec smooth_sat(const Vec& s, const SmoothSaturation& sat) { return sat(s); }

}  // namespace regul
