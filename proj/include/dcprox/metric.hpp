#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "dcprox/problem.hpp"

namespace dcprox {

// Safeguards for the memoryless metric: curvature regularization constant
// and clamping intervals for the spectral scaling and sizing parameters.
struct MetricConfig {
    double nu_tilde = 1e-6;
    double gamma_min = 1e-8;
    double gamma_max = 1e8;
    double tau_min = 1e-4;
    double tau_max = 1e4;
    double tau_rule = 1.0;  // fixed sizing value, clamped to [tau_min, tau_max]
};

// Displacement pair with the regularized gradient gap z = y + nu * s, where
// nu is chosen so that s^T z >= nu_tilde * ||s||^2 even for nonconvex g.
struct CurvaturePair {
    Vector s;  // iterate displacement
    Vector y;  // raw gradient gap
    Vector z;  // regularized gap
    double nu = 0.0;
    double sz = 0.0;  // cached s.z
    double ss = 0.0;  // cached s.s
};

inline std::optional<CurvaturePair> make_curvature_pair(const Vector& x_prev, const Vector& x_cur,
                                                        const Vector& g_prev, const Vector& g_cur,
                                                        const MetricConfig& cfg) {
    if (x_prev.size() != x_cur.size() || g_prev.size() != g_cur.size() ||
        x_prev.size() != g_prev.size())
        throw std::invalid_argument("curvature pair: dimension mismatch");

    CurvaturePair pair;
    pair.s = x_cur - x_prev;
    pair.ss = pair.s.squaredNorm();
    if (pair.ss == 0.0) return std::nullopt;  // caller keeps its fallback metric

    pair.y = g_cur - g_prev;
    const double sy = pair.s.dot(pair.y);
    if (sy >= cfg.nu_tilde * pair.ss) {
        pair.nu = 0.0;
        pair.z = pair.y;
        pair.sz = sy;
    } else {
        pair.nu = std::max(0.0, -sy / pair.ss) + cfg.nu_tilde;
        pair.z = pair.y + pair.nu * pair.s;
        // floor guards the curvature bound against cancellation in sy + nu*ss
        pair.sz = std::max(sy + pair.nu * pair.ss, cfg.nu_tilde * pair.ss);
    }
    return pair;
}

// True when s and z are numerically parallel, i.e. the two rank-one factors
// of the metric would be linearly dependent and the factored form degenerates.
inline bool nearly_parallel(const CurvaturePair& pair) {
    const double cosine = pair.sz / std::sqrt(pair.ss * pair.z.squaredNorm());
    return std::abs(cosine) > 1.0 - 1e-12;
}

// Memoryless BFGS metric in factored form, B = tau I + u1 u1^T - u2 u2^T,
// satisfying the scaled secant equation B s = gamma z. The inverse is applied
// through the closed-form rank-two expression, so both directions cost O(n).
struct RankTwoMetric {
    double tau = 1.0;
    double gamma = 1.0;
    Vector u1;
    Vector u2;
    CurvaturePair pair;  // retained for inverse products
    double zz = 0.0;     // cached z.z
    Vector w;            // inverse-formula vector sqrt(z.z) * (s/s.z - z/z.z)

    // B v in O(n).
    Vector apply(const Vector& v) const {
        return tau * v + u1 * u1.dot(v) - u2 * u2.dot(v);
    }

    // B^{-1} v in O(n).
    Vector apply_inverse(const Vector& v) const {
        return (1.0 / tau) * (v - pair.z * (pair.z.dot(v) / zz) + w * w.dot(v)) +
               pair.s * (pair.s.dot(v) / (gamma * pair.sz));
    }

    double norm(const Vector& v) const { return std::sqrt(std::max(0.0, v.dot(apply(v)))); }

    double inverse_norm(const Vector& v) const {
        return std::sqrt(std::max(0.0, v.dot(apply_inverse(v))));
    }
};

inline RankTwoMetric bfgs_metric(const CurvaturePair& pair, const MetricConfig& cfg) {
    if (!(pair.sz > 0.0)) throw std::invalid_argument("bfgs_metric: nonpositive curvature");

    RankTwoMetric metric;
    metric.pair = pair;
    metric.zz = pair.z.squaredNorm();
    metric.gamma = std::clamp(pair.sz / metric.zz, cfg.gamma_min, cfg.gamma_max);
    metric.tau = std::clamp(cfg.tau_rule, cfg.tau_min, cfg.tau_max);
    metric.u1 = std::sqrt(metric.gamma / pair.sz) * pair.z;
    metric.u2 = (std::sqrt(metric.tau) / std::sqrt(pair.ss)) * pair.s;
    metric.w = std::sqrt(metric.zz) * (pair.s / pair.sz - pair.z / metric.zz);
    return metric;
}

}  // namespace dcprox
