#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace dcprox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Componentwise soft threshold: the proximal mapping of level * ||.||_1.
inline Vector soft_threshold(const Vector& v, double level) {
    if (level < 0.0) throw std::invalid_argument("soft_threshold: negative level");
    return v.unaryExpr([level](double t) {
        if (t >= level) return t - level;
        if (t <= -level) return t + level;
        return 0.0;
    });
}

// Largest eigenvalue of A^T A (= squared spectral norm of A), estimated by
// power iteration with the normalized all-ones start vector. Sweeps until the
// relative Rayleigh-quotient change drops below 1e-12, capped at 1e4 sweeps;
// the tight stop keeps the underestimate below 1e-8 relative even when the
// top of the spectrum is crowded.
inline double estimate_lipschitz(const Matrix& A) {
    const Eigen::Index n = A.cols();
    if ((A.array() == 0.0).all()) throw std::invalid_argument("estimate_lipschitz: zero operator");

    Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double rayleigh = 0.0;
    Eigen::Index escape = 0;  // next canonical basis vector if v lands in the null space
    for (int sweep = 0; sweep < 10000; ++sweep) {
        Vector q = A.transpose() * (A * v);
        const double qn = q.norm();
        if (qn == 0.0) {
            // restart from the first basis vector with a nonzero column
            while (escape < n && A.col(escape).squaredNorm() == 0.0) ++escape;
            v.setZero();
            v[escape] = 1.0;
            continue;
        }
        const double next = v.dot(q);
        v = q / qn;
        if (sweep > 0 && std::abs(next - rayleigh) < 1e-12 * std::abs(next)) return next;
        rayleigh = next;
    }
    return rayleigh;
}

struct SmoothEval {
    double value;
    Vector grad;
};

// Least squares term g(x) = 0.5 ||Ax - b||^2 with its gradient Lipschitz
// constant cached at construction.
struct LeastSquaresSmooth {
    Matrix A;
    Vector b;
    double lip = 0.0;

    LeastSquaresSmooth(Matrix A_, Vector b_) : A(std::move(A_)), b(std::move(b_)) {
        if (A.rows() < 1 || A.cols() < 1) throw std::invalid_argument("least squares: empty matrix");
        if (A.rows() != b.size()) throw std::invalid_argument("least squares: A rows != b length");
        lip = estimate_lipschitz(A);
    }

    Eigen::Index dim() const { return A.cols(); }

    // Value and gradient with exactly one A*x and one A^T*r product.
    SmoothEval eval(const Vector& x) const {
        if (x.size() != A.cols()) throw std::invalid_argument("least squares: dimension mismatch");
        Vector r = A * x - b;
        return {0.5 * r.squaredNorm(), A.transpose() * r};
    }

    // Value only (single matrix-vector product); used by line searches.
    double value_at(const Vector& x) const {
        if (x.size() != A.cols()) throw std::invalid_argument("least squares: dimension mismatch");
        return 0.5 * (A * x - b).squaredNorm();
    }
};

enum class RegKind {
    L1MinusL2,      // lambda * (||x||_1 - ||x||_2)
    LogSumPenalty,  // lambda * sum log(1 + |x_i| / eps)
    PureL1          // lambda * ||x||_1 (degenerate case, no concave part)
};

struct RegEval {
    double h1;       // convex part
    double h2;       // concave-correction part
    Vector subgrad;  // element of the subdifferential of h2
};

// DC regularizer h = h1 - h2 where h1 is a weighted l1 norm in every
// supported case. l1_weight is lambda for l1-l2 and pure-l1, lambda/eps for
// the log-sum penalty.
struct Regularizer {
    RegKind kind = RegKind::L1MinusL2;
    double lambda = 0.0;
    double eps = 0.0;
    double l1_weight = 0.0;

    static Regularizer l1_minus_l2(double lambda) {
        require_weight(lambda);
        return {RegKind::L1MinusL2, lambda, 0.0, lambda};
    }

    static Regularizer log_sum(double lambda, double eps) {
        require_weight(lambda);
        if (!(eps > 0.0)) throw std::invalid_argument("log-sum penalty: eps must be positive");
        return {RegKind::LogSumPenalty, lambda, eps, lambda / eps};
    }

    static Regularizer pure_l1(double lambda) {
        require_weight(lambda);
        return {RegKind::PureL1, lambda, 0.0, lambda};
    }

    double h1(const Vector& x) const { return l1_weight * x.lpNorm<1>(); }

    // h1, h2 and a subgradient of h2. At kinks the zero element of the
    // subdifferential is chosen.
    RegEval eval(const Vector& x) const {
        RegEval out;
        out.h1 = h1(x);
        switch (kind) {
            case RegKind::L1MinusL2: {
                const double nrm = x.norm();
                out.h2 = lambda * nrm;
                out.subgrad = nrm > 0.0 ? Vector((lambda / nrm) * x) : Vector(Vector::Zero(x.size()));
                break;
            }
            case RegKind::LogSumPenalty: {
                double h2 = 0.0;
                Vector xi(x.size());
                const double log_eps = std::log(eps);
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double a = std::abs(x[i]);
                    h2 += a / eps - std::log(a + eps) + log_eps;
                    xi[i] = x[i] != 0.0
                                ? (x[i] > 0.0 ? 1.0 : -1.0) * lambda * (1.0 / eps - 1.0 / (a + eps))
                                : 0.0;
                }
                out.h2 = lambda * h2;
                out.subgrad = std::move(xi);
                break;
            }
            case RegKind::PureL1:
                out.h2 = 0.0;
                out.subgrad = Vector::Zero(x.size());
                break;
        }
        return out;
    }

    // Closed-form value of h = h1 - h2; used as an algebraic cross-check.
    double penalty(const Vector& x) const {
        switch (kind) {
            case RegKind::L1MinusL2:
                return lambda * (x.lpNorm<1>() - x.norm());
            case RegKind::LogSumPenalty: {
                double acc = 0.0;
                for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::log1p(std::abs(x[i]) / eps);
                return lambda * acc;
            }
            case RegKind::PureL1:
                return lambda * x.lpNorm<1>();
        }
        return 0.0;
    }

private:
    static void require_weight(double lambda) {
        // lambda = 0 is permitted as the degenerate unregularized case
        if (!(lambda >= 0.0)) throw std::invalid_argument("regularizer: weight must be nonnegative");
    }
};

// Composite problem f = g + h1 - h2.
struct DcProblem {
    LeastSquaresSmooth smooth;
    Regularizer reg;

    DcProblem(LeastSquaresSmooth s, Regularizer r) : smooth(std::move(s)), reg(std::move(r)) {}

    Eigen::Index dim() const { return smooth.dim(); }

    double objective(const Vector& x) const {
        const RegEval re = reg.eval(x);
        return smooth.value_at(x) + re.h1 - re.h2;
    }
};

}  // namespace dcprox
