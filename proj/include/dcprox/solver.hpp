#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcprox/metric.hpp"
#include "dcprox/problem.hpp"
#include "dcprox/subproblem.hpp"

namespace dcprox {

struct OuterConfig {
    double delta = 0.5;        // sufficient-decrease constant, in (0, 1)
    double beta = 0.5;         // backtracking factor, in (0, 1)
    double eps = 1e-5;         // stop when ||x+ - x|| <= eps * max(1, ||x||)
    int max_outer = 10000;
    int max_backtracks = 60;
    InnerConfig inner;
    MetricConfig metric;
    bool force_identity_metric = false;  // always take the exact L*I step
    bool force_unit_step = false;        // skip the line search, eta = 1
    std::function<void(int, const Vector&)> iterate_observer;  // test hook
};

enum class RunStatus { Converged, MaxIter, LineSearchFail };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Converged: return "Converged";
        case RunStatus::MaxIter: return "MaxIter";
        case RunStatus::LineSearchFail: return "LineSearchFail";
    }
    return "Unknown";
}

struct TraceRow {
    int k = 0;
    double f = 0.0;          // objective after the step (at x_k on the terminal row)
    double d_norm = 0.0;
    double eta = 0.0;        // 0 on the terminal row
    int inner_iters = 0;
    int line_search_backtracks = 0;
    double model_decrease = 0.0;
    bool fallback = false;   // inner solve failed, exact diagonal step taken instead
    double wall_ms = 0.0;    // elapsed since solve start
};

struct RunTrace {
    std::vector<TraceRow> rows;
    RunStatus status = RunStatus::MaxIter;
    double f_initial = 0.0;
    double f_final = 0.0;
    double criticality = 0.0;            // componentwise optimality residual at x_final
    double criticality_threshold = 0.0;  // 10 * eps * L diagnostic bound
    int outer_iters = 0;                 // accepted steps
    long long total_inner_iters = 0;
    double wall_ms = 0.0;
};

struct SolveResult {
    Vector x;
    RunTrace trace;
};

struct IterateState {
    Vector x;
    double f = 0.0;
    Vector grad;     // gradient of the smooth part
    Vector subgrad;  // subgradient of the concave-correction part
    int k = 0;
};

struct StepOutcome {
    Vector x_plus;
    Vector d;
    double model_decrease = 0.0;
    double eta = 0.0;
};

struct LineSearchResult {
    double eta = 0.0;
    double f_new = 0.0;
    bool failed = false;
    int backtracks = 0;
};

// Componentwise distance of grad(g) - subgrad(h2) to the negative
// subdifferential of the weighted l1 term; zero exactly at critical points.
inline double criticality_residual(const DcProblem& prob, const Vector& x) {
    const SmoothEval sm = prob.smooth.eval(x);
    const RegEval re = prob.reg.eval(x);
    const double w = prob.reg.l1_weight;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = sm.grad[i] - re.subgrad[i];
        const double r = x[i] != 0.0 ? std::abs(v + (x[i] > 0.0 ? w : -w))
                                     : std::max(0.0, std::abs(v) - w);
        worst = std::max(worst, r);
    }
    return worst;
}

// Backtracking search for the largest eta in {1, beta, beta^2, ...} with
// f(x + eta d) <= f(x) + delta * eta * model_decrease. The eta = 1 trial
// evaluates the candidate point itself so a full step introduces no
// floating-point drift.
inline LineSearchResult line_search(const DcProblem& prob, const IterateState& state,
                                    const StepOutcome& candidate, const OuterConfig& cfg) {
    double eta = 1.0;
    for (int trial = 0; trial <= cfg.max_backtracks; ++trial) {
        const Vector x_try = eta == 1.0 ? candidate.x_plus : Vector(state.x + eta * candidate.d);
        const double f_try = prob.objective(x_try);
        if (f_try <= state.f + cfg.delta * eta * candidate.model_decrease)
            return {eta, f_try, false, trial};
        eta *= cfg.beta;
    }
    return {0.0, state.f, true, cfg.max_backtracks + 1};
}

namespace detail {

// Exact proximal step in the diagonal metric c * I.
inline Vector diagonal_prox_step(const Vector& x, const Vector& grad, const Vector& subgrad,
                                 double c, double l1_weight) {
    return soft_threshold(x - (grad - subgrad) / c, l1_weight / c);
}

inline IterateState initial_state(const DcProblem& prob, const Vector& x0) {
    if (x0.size() != prob.dim()) throw std::invalid_argument("solve: x0 dimension mismatch");
    if (!x0.allFinite()) throw std::invalid_argument("solve: x0 must be finite");
    IterateState st;
    st.x = x0;
    const SmoothEval sm = prob.smooth.eval(st.x);
    const RegEval re = prob.reg.eval(st.x);
    st.f = sm.value + re.h1 - re.h2;
    st.grad = sm.grad;
    st.subgrad = re.subgrad;
    if (!std::isfinite(st.f)) throw std::runtime_error("solve: objective non-finite at x0");
    return st;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void finalize_trace(RunTrace& trace, const DcProblem& prob, const IterateState& st,
                           RunStatus status, double eps,
                           std::chrono::steady_clock::time_point t0) {
    trace.status = status;
    trace.f_final = st.f;
    trace.criticality = criticality_residual(prob, st.x);
    trace.criticality_threshold = 10.0 * eps * prob.smooth.lip;
    trace.wall_ms = elapsed_ms(t0);
}

}  // namespace detail

// Proximal Newton-type iteration: a rank-two memoryless BFGS metric is built
// from the last displacement, the scaled proximal subproblem is solved
// inexactly by the two-dimensional semi-smooth Newton method, and the step is
// globalized by a backtracking line search. The first iteration (and any
// iteration whose inner solve fails) takes the exact L*I proximal step.
inline SolveResult solve_proximal_newton(const DcProblem& prob, const Vector& x0,
                                         const OuterConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lip = prob.smooth.lip;
    const double w = prob.reg.l1_weight;

    IterateState st = detail::initial_state(prob, x0);
    RunTrace trace;
    trace.f_initial = st.f;
    if (cfg.iterate_observer) cfg.iterate_observer(0, st.x);

    Vector x_prev, grad_prev;
    bool have_prev = false;
    RunStatus status = RunStatus::MaxIter;

    for (int k = 0; k < cfg.max_outer; ++k) {
        st.k = k;
        Vector x_plus;
        int inner_iters = 0;
        bool fallback = false;

        std::optional<RankTwoMetric> metric;
        bool degenerate_pair = false;
        if (!cfg.force_identity_metric && have_prev) {
            auto pair = make_curvature_pair(x_prev, st.x, grad_prev, st.grad, cfg.metric);
            if (pair && !nearly_parallel(*pair)) {
                metric = bfgs_metric(*pair, cfg.metric);
            } else if (pair) {
                degenerate_pair = true;  // parallel factors: fall back to tau * I
            }
        }

        if (metric) {
            Vector xbar = st.x - metric->apply_inverse(st.grad - st.subgrad);
            ProxSubproblem sub(std::move(xbar), metric->tau, metric->u1, metric->u2, w);
            InnerConfig icfg = cfg.inner;
            icfg.eps = cfg.eps;
            InnerResult inner = solve_subproblem(sub, st.x, *metric, icfg);
            inner_iters = inner.newton_iters;
            if (inner.status == InnerStatus::MaxIter ||
                inner.status == InnerStatus::JacobianSingular) {
                fallback = true;
                x_plus = detail::diagonal_prox_step(st.x, st.grad, st.subgrad, lip, w);
            } else {
                x_plus = std::move(inner.x_plus);
            }
        } else {
            const double c = degenerate_pair
                                 ? std::clamp(cfg.metric.tau_rule, cfg.metric.tau_min, cfg.metric.tau_max)
                                 : lip;
            x_plus = detail::diagonal_prox_step(st.x, st.grad, st.subgrad, c, w);
        }

        const Vector d = x_plus - st.x;
        const double d_norm = d.norm();
        trace.total_inner_iters += inner_iters;

        if (d_norm <= cfg.eps * std::max(1.0, st.x.norm())) {
            trace.rows.push_back({k, st.f, d_norm, 0.0, inner_iters, 0, 0.0, fallback,
                                  detail::elapsed_ms(t0)});
            status = RunStatus::Converged;
            break;
        }

        const double model_decrease =
            (st.grad - st.subgrad).dot(d) + w * (x_plus.lpNorm<1>() - st.x.lpNorm<1>());

        double eta = 1.0, f_new = 0.0;
        int backtracks = 0;
        if (cfg.force_unit_step) {
            f_new = prob.objective(x_plus);
        } else {
            const StepOutcome candidate{x_plus, d, model_decrease, 0.0};
            const LineSearchResult ls = line_search(prob, st, candidate, cfg);
            if (ls.failed) {
                trace.rows.push_back({k, st.f, d_norm, 0.0, inner_iters, ls.backtracks,
                                      model_decrease, fallback, detail::elapsed_ms(t0)});
                status = RunStatus::LineSearchFail;
                break;
            }
            eta = ls.eta;
            f_new = ls.f_new;
            backtracks = ls.backtracks;
        }

        x_prev = std::move(st.x);
        grad_prev = std::move(st.grad);
        st.x = eta == 1.0 ? std::move(x_plus) : Vector(x_prev + eta * d);
        const SmoothEval sm = prob.smooth.eval(st.x);
        const RegEval re = prob.reg.eval(st.x);
        st.grad = sm.grad;
        st.subgrad = re.subgrad;
        const double f_old = st.f;
        st.f = f_new;
        have_prev = true;

        if (!std::isfinite(st.f)) throw std::runtime_error("solve: objective became non-finite");
        if (st.f > f_old + 1e-9 * std::max(1.0, std::abs(f_old)))
            throw std::logic_error("solve: descent violated");

        trace.rows.push_back({k, st.f, d_norm, eta, inner_iters, backtracks, model_decrease,
                              fallback, detail::elapsed_ms(t0)});
        trace.outer_iters = k + 1;
        if (cfg.iterate_observer) cfg.iterate_observer(k + 1, st.x);
    }

    detail::finalize_trace(trace, prob, st, status, cfg.eps, t0);
    return {std::move(st.x), std::move(trace)};
}

// Proximal DC step with the fixed diagonal metric L*I and unit step size;
// shares the stopping rule of solve_proximal_newton so iteration counts are
// directly comparable.
inline SolveResult solve_pdca(const DcProblem& prob, const Vector& x0, const OuterConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lip = prob.smooth.lip;
    const double w = prob.reg.l1_weight;

    IterateState st = detail::initial_state(prob, x0);
    RunTrace trace;
    trace.f_initial = st.f;
    if (cfg.iterate_observer) cfg.iterate_observer(0, st.x);

    RunStatus status = RunStatus::MaxIter;
    for (int k = 0; k < cfg.max_outer; ++k) {
        Vector x_plus = detail::diagonal_prox_step(st.x, st.grad, st.subgrad, lip, w);
        const Vector d = x_plus - st.x;
        const double d_norm = d.norm();

        if (d_norm <= cfg.eps * std::max(1.0, st.x.norm())) {
            trace.rows.push_back({k, st.f, d_norm, 0.0, 0, 0, 0.0, false, detail::elapsed_ms(t0)});
            status = RunStatus::Converged;
            break;
        }

        const double model_decrease =
            (st.grad - st.subgrad).dot(d) + w * (x_plus.lpNorm<1>() - st.x.lpNorm<1>());

        st.x = std::move(x_plus);
        const SmoothEval sm = prob.smooth.eval(st.x);
        const RegEval re = prob.reg.eval(st.x);
        const double f_old = st.f;
        st.f = sm.value + re.h1 - re.h2;
        st.grad = sm.grad;
        st.subgrad = re.subgrad;

        if (!std::isfinite(st.f)) throw std::runtime_error("pdca: objective became non-finite");
        if (st.f > f_old + 1e-9 * std::max(1.0, std::abs(f_old)))
            throw std::logic_error("pdca: descent violated");

        trace.rows.push_back({k, st.f, d_norm, 1.0, 0, 0, model_decrease, false,
                              detail::elapsed_ms(t0)});
        trace.outer_iters = k + 1;
        if (cfg.iterate_observer) cfg.iterate_observer(k + 1, st.x);
    }

    detail::finalize_trace(trace, prob, st, status, cfg.eps, t0);
    return {std::move(st.x), std::move(trace)};
}

// Proximal DC step from an extrapolated point. Momentum follows the standard
// accelerated t-sequence, dropped every fixed_restart iterations; the
// subgradient of h2 is taken at the current iterate, the smooth gradient at
// the extrapolated point. The objective is not monotone along these iterates.
inline SolveResult solve_pdcae(const DcProblem& prob, const Vector& x0, const OuterConfig& cfg,
                               int fixed_restart = 200) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lip = prob.smooth.lip;
    const double w = prob.reg.l1_weight;

    IterateState st = detail::initial_state(prob, x0);
    RunTrace trace;
    trace.f_initial = st.f;
    if (cfg.iterate_observer) cfg.iterate_observer(0, st.x);

    Vector x_prev = st.x;
    double t_prev = 1.0, t_cur = 1.0;
    RunStatus status = RunStatus::MaxIter;

    for (int k = 0; k < cfg.max_outer; ++k) {
        const double momentum = (t_prev - 1.0) / t_cur;
        const Vector y = st.x + momentum * (st.x - x_prev);
        const Vector grad_y = prob.smooth.eval(y).grad;
        Vector x_plus = detail::diagonal_prox_step(y, grad_y, st.subgrad, lip, w);
        const Vector d = x_plus - st.x;
        const double d_norm = d.norm();

        if (d_norm <= cfg.eps * std::max(1.0, st.x.norm())) {
            trace.rows.push_back({k, st.f, d_norm, 0.0, 0, 0, 0.0, false, detail::elapsed_ms(t0)});
            status = RunStatus::Converged;
            break;
        }

        x_prev = std::move(st.x);
        st.x = std::move(x_plus);
        const SmoothEval sm = prob.smooth.eval(st.x);
        const RegEval re = prob.reg.eval(st.x);
        st.f = sm.value + re.h1 - re.h2;
        st.subgrad = re.subgrad;
        if (!std::isfinite(st.f)) throw std::runtime_error("pdcae: objective became non-finite");

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_cur * t_cur));
        t_prev = t_cur;
        t_cur = t_next;
        if ((k + 1) % fixed_restart == 0) {
            t_prev = 1.0;
            t_cur = 1.0;
        }

        trace.rows.push_back({k, st.f, d_norm, 1.0, 0, 0, 0.0, false, detail::elapsed_ms(t0)});
        trace.outer_iters = k + 1;
        if (cfg.iterate_observer) cfg.iterate_observer(k + 1, st.x);
    }

    detail::finalize_trace(trace, prob, st, status, cfg.eps, t0);
    return {std::move(st.x), std::move(trace)};
}

}  // namespace dcprox
