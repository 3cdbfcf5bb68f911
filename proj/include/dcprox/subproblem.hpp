#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcprox/metric.hpp"
#include "dcprox/problem.hpp"

namespace dcprox {

// (tau I + u1 u1^T)^{-1} v through the Sherman-Morrison identity.
inline Vector sherman_morrison_apply(double tau, const Vector& u1, const Vector& v) {
    if (!(tau > 0.0)) throw std::invalid_argument("sherman_morrison_apply: tau must be positive");
    const double denom = tau * tau + tau * u1.squaredNorm();
    return v / tau - u1 * (u1.dot(v) / denom);
}

struct InnerConfig {
    double sigma = 1e-4;       // merit sufficient-decrease constant, in (0, 1/2)
    double rho = 0.5;          // backtracking factor, in (0, 1)
    double theta = 0.99;       // inexactness parameter, in (theta_bar, 1]
    double eps = 1e-5;         // step tolerance shared with the outer loop
    int max_newton = 100;
    int max_backtracks = 50;
    double det_floor = 1e-12;  // 2x2 Jacobian singularity floor
    double root_floor = 1e-13; // ||system|| below root_floor*max(1,initial) counts as a root
};

enum class InnerStatus { InexactSatisfied, DkSmall, MaxIter, JacobianSingular };

struct InnerResult {
    Vector x_plus;             // proximal candidate at the final alpha
    Vector residual;           // subproblem optimality residual at the final alpha
    Eigen::Vector2d alpha = Eigen::Vector2d::Zero();
    int newton_iters = 0;
    int backtracks = 0;        // total merit line-search halvings
    InnerStatus status = InnerStatus::MaxIter;
    std::vector<double> system_norms;  // ||system(alpha_j)|| per visited iterate
    std::vector<double> steps;         // accepted step length per Newton iteration
};

// One scaled proximal subproblem: find Prox over the rank-two metric
// B = tau I + u1 u1^T - u2 u2^T of the shifted point xbar, with h1 a weighted
// l1 norm. The n-dimensional problem collapses to a two-dimensional
// semi-smooth root system in alpha; every evaluation below is O(n).
class ProxSubproblem {
public:
    ProxSubproblem(Vector xbar, double tau, Vector u1, Vector u2, double l1_level)
        : xbar_(std::move(xbar)),
          tau_(tau),
          u1_(std::move(u1)),
          u2_(std::move(u2)),
          l1_level_(l1_level),
          threshold_(l1_level / tau) {
        if (!(tau_ > 0.0)) throw std::invalid_argument("subproblem: tau must be positive");
        if (!(l1_level_ >= 0.0)) throw std::invalid_argument("subproblem: negative l1 level");
        p_u2_ = sherman_morrison_apply(tau_, u1_, u2_);
        u1u1_ = u1_.squaredNorm();
        u1u2_ = u1_.dot(u2_);
        u2u2_ = u2_.squaredNorm();
        u1xbar_ = u1_.dot(xbar_);
        u2xbar_ = u2_.dot(xbar_);
        u1pu2_ = u1_.dot(p_u2_);
        u2pu2_ = u2_.dot(p_u2_);
    }

    Eigen::Index dim() const { return xbar_.size(); }
    const Vector& xbar() const { return xbar_; }
    double tau() const { return tau_; }
    const Vector& u1() const { return u1_; }
    const Vector& u2() const { return u2_; }
    double l1_level() const { return l1_level_; }
    double threshold() const { return threshold_; }
    const Vector& solved_u2() const { return p_u2_; }

    // Point fed to the scaled soft threshold.
    Vector prox_point(const Eigen::Vector2d& alpha) const {
        return xbar_ - (alpha[0] / tau_) * u1_ + alpha[1] * p_u2_;
    }

    struct Eval {
        Vector zeta;             // prox point
        Vector xhat;             // soft threshold of zeta
        Eigen::Vector2d value;   // two-dimensional system value
    };

    Eval eval(const Eigen::Vector2d& alpha) const {
        Eval e;
        e.zeta = prox_point(alpha);
        e.xhat = soft_threshold(e.zeta, threshold_);
        e.value[0] = u1xbar_ + alpha[1] * u1pu2_ - u1_.dot(e.xhat) + alpha[0];
        e.value[1] = u2xbar_ - u2_.dot(e.xhat) + alpha[1];
        return e;
    }

    // Value of the two-dimensional root system.
    Eigen::Vector2d system_value(const Eigen::Vector2d& alpha) const { return eval(alpha).value; }

    // Optimality residual [-u1, u2] * system_value(alpha) of the subproblem.
    Vector gradient_residual(const Eigen::Vector2d& alpha) const {
        return residual_from(system_value(alpha));
    }

    Vector residual_from(const Eigen::Vector2d& value) const {
        return -u1_ * value[0] + u2_ * value[1];
    }

    // Clarke generalized Jacobian element of the system at alpha, arranged as
    // the gradient matrix (columns are gradients of the two components).
    // Components of zeta sitting exactly on the threshold select weight 0.
    Eigen::Matrix2d clarke_jacobian(const Eigen::Vector2d& alpha) const {
        return clarke_jacobian_at(prox_point(alpha));
    }

    Eigen::Matrix2d clarke_jacobian_at(const Vector& zeta) const {
        double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
        for (Eigen::Index i = 0; i < zeta.size(); ++i) {
            if (std::abs(zeta[i]) > threshold_) {
                a11 += u1_[i] * u1_[i];
                a12 += u2_[i] * u1_[i];
                a22 += u2_[i] * p_u2_[i];
            } else {
                a21 += u1_[i] * p_u2_[i];
            }
        }
        Eigen::Matrix2d v;
        v(0, 0) = 1.0 + a11 / tau_;
        v(0, 1) = a12 / tau_;
        v(1, 0) = a21;
        v(1, 1) = 1.0 - a22;
        return v;
    }

private:
    Vector xbar_;
    double tau_;
    Vector u1_;
    Vector u2_;
    double l1_level_;
    double threshold_;
    Vector p_u2_;  // (tau I + u1 u1^T)^{-1} u2
    double u1u1_ = 0.0, u1u2_ = 0.0, u2u2_ = 0.0;
    double u1xbar_ = 0.0, u2xbar_ = 0.0;
    double u1pu2_ = 0.0, u2pu2_ = 0.0;
};

// Semi-smooth Newton iteration on the two-dimensional system with a
// backtracking line search on the merit 0.5 ||system||^2. Stops when the
// inexactness test ||residual||_{B^{-1}} <= (1 - theta) ||x+ - x_k||_B
// holds, when the candidate step x+ - x_k is already below the outer
// tolerance, or on the caps.
inline InnerResult solve_subproblem(const ProxSubproblem& sub, const Vector& x_k,
                                    const RankTwoMetric& metric, const InnerConfig& cfg) {
    if (x_k.size() != sub.dim()) throw std::invalid_argument("solve_subproblem: dimension mismatch");

    InnerResult out;
    Eigen::Vector2d alpha = Eigen::Vector2d::Zero();
    const double step_floor = cfg.eps * std::max(1.0, x_k.norm());
    double root_floor = 0.0;

    ProxSubproblem::Eval ev = sub.eval(alpha);
    for (int j = 0;; ++j) {
        const double system_norm = ev.value.norm();
        out.system_norms.push_back(system_norm);
        if (j == 0) root_floor = cfg.root_floor * std::max(1.0, system_norm);

        Vector d = ev.xhat - x_k;
        Vector r = sub.residual_from(ev.value);
        const double r_h = metric.inverse_norm(r);
        const double d_b = metric.norm(d);

        auto finish = [&](InnerStatus status) {
            out.x_plus = std::move(ev.xhat);
            out.residual = std::move(r);
            out.alpha = alpha;
            out.status = status;
            return out;
        };

        if (r_h <= (1.0 - cfg.theta) * d_b || system_norm <= root_floor)
            return finish(InnerStatus::InexactSatisfied);
        if (d.norm() <= step_floor) return finish(InnerStatus::DkSmall);
        if (j >= cfg.max_newton) return finish(InnerStatus::MaxIter);

        const Eigen::Matrix2d v = sub.clarke_jacobian_at(ev.zeta);
        const double det = v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0);
        if (std::abs(det) < cfg.det_floor) return finish(InnerStatus::JacobianSingular);

        // Newton direction p = -(V^T)^{-1} system
        Eigen::Vector2d p;
        p[0] = (-v(1, 1) * ev.value[0] + v(1, 0) * ev.value[1]) / det;
        p[1] = (v(0, 1) * ev.value[0] - v(0, 0) * ev.value[1]) / det;

        const double merit = 0.5 * system_norm * system_norm;
        double t = 1.0;
        bool accepted = false;
        ProxSubproblem::Eval trial;
        for (int l = 0; l <= cfg.max_backtracks; ++l, t *= cfg.rho) {
            trial = sub.eval(alpha + t * p);
            if (0.5 * trial.value.squaredNorm() <= (1.0 - 2.0 * cfg.sigma * t) * merit) {
                accepted = true;
                out.backtracks += l;
                break;
            }
        }
        if (!accepted) return finish(InnerStatus::MaxIter);

        alpha += t * p;
        ev = std::move(trial);
        out.steps.push_back(t);
        out.newton_iters = j + 1;
    }
}

}  // namespace dcprox
