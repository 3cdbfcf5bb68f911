#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dcprox/instance.hpp"
#include "dcprox/problem.hpp"
#include "dcprox/solver.hpp"

namespace dcprox {

// Batch description: a grid of problem scales and regularization weights,
// each cell solved by every requested method on seeds_per_cell instances.
// Scale l maps to dims (720 l, 2560 l, 80 l) divided by the shrink divisor.
struct ExperimentSpec {
    std::vector<int> scales{1};
    double shrink = 1.0;
    std::vector<double> lambdas{0.01};
    RegKind reg = RegKind::L1MinusL2;
    double reg_eps = 0.5;  // log-sum shift
    int seeds_per_cell = 20;
    std::uint64_t seed_base = 1;
    std::vector<std::string> methods{"mbfgs-snewton", "pdca", "pdcae"};
    double noise = 0.01;
    double tol = 1e-5;
    double theta = 0.99;
    int max_outer = 10000;
};

struct ResultRecord {
    std::string method;
    int l = 0;
    std::uint64_t m = 0, n = 0, p = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::string status;
    long long outer_iters = 0;
    long long total_inner_iters = 0;
    double f_final = 0.0;
    double criticality = 0.0;
    double wall_time_ms = 0.0;
};

inline bool known_method(const std::string& name) {
    return name == "mbfgs-snewton" || name == "pdca" || name == "pdcae";
}

inline SolveResult run_method(const std::string& method, const DcProblem& prob, const Vector& x0,
                              const OuterConfig& cfg) {
    if (method == "mbfgs-snewton") return solve_proximal_newton(prob, x0, cfg);
    if (method == "pdca") return solve_pdca(prob, x0, cfg);
    if (method == "pdcae") return solve_pdcae(prob, x0, cfg);
    throw std::invalid_argument("unknown method: " + method);
}

inline Regularizer make_regularizer(RegKind kind, double lambda, double eps) {
    switch (kind) {
        case RegKind::L1MinusL2: return Regularizer::l1_minus_l2(lambda);
        case RegKind::LogSumPenalty: return Regularizer::log_sum(lambda, eps);
        case RegKind::PureL1: return Regularizer::pure_l1(lambda);
    }
    throw std::invalid_argument("unknown regularizer kind");
}

inline RegKind reg_kind_from_string(const std::string& name) {
    if (name == "l1l2") return RegKind::L1MinusL2;
    if (name == "logsum") return RegKind::LogSumPenalty;
    if (name == "l1") return RegKind::PureL1;
    throw std::invalid_argument("unknown regularizer: " + name);
}

inline std::string to_string(RegKind kind) {
    switch (kind) {
        case RegKind::L1MinusL2: return "l1l2";
        case RegKind::LogSumPenalty: return "logsum";
        case RegKind::PureL1: return "l1";
    }
    return "?";
}

namespace detail {

// Shortest round-trip decimal form; keeps CSV and JSON output reproducible.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::uint64_t scaled_dim(std::uint64_t base, int l, double shrink) {
    const double raw = static_cast<double>(base) * l / shrink;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(raw)));
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t s = v.size();
    return s % 2 == 1 ? v[s / 2] : 0.5 * (v[s / 2 - 1] + v[s / 2]);
}

}  // namespace detail

struct BenchJob {
    std::string method;
    int l = 0;
    std::uint64_t m = 0, n = 0, p = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
};

inline std::vector<BenchJob> expand_jobs(const ExperimentSpec& spec) {
    if (spec.scales.empty() || spec.lambdas.empty() || spec.methods.empty())
        throw std::invalid_argument("bench spec: scales, lambdas and methods must be non-empty");
    if (!(spec.shrink >= 1.0)) throw std::invalid_argument("bench spec: shrink divisor must be >= 1");
    if (spec.seeds_per_cell < 1) throw std::invalid_argument("bench spec: seeds_per_cell must be >= 1");
    for (const auto& method : spec.methods)
        if (!known_method(method)) throw std::invalid_argument("bench spec: unknown method " + method);

    std::vector<BenchJob> jobs;
    for (const auto& method : spec.methods)
        for (int l : spec.scales)
            for (double lambda : spec.lambdas)
                for (int i = 0; i < spec.seeds_per_cell; ++i) {
                    BenchJob job;
                    job.method = method;
                    job.l = l;
                    job.m = detail::scaled_dim(720, l, spec.shrink);
                    job.n = detail::scaled_dim(2560, l, spec.shrink);
                    job.p = std::min(detail::scaled_dim(80, l, spec.shrink), job.n);
                    job.lambda = lambda;
                    job.seed = spec.seed_base + 10000ULL * static_cast<std::uint64_t>(l) +
                               static_cast<std::uint64_t>(i);
                    jobs.push_back(std::move(job));
                }
    return jobs;
}

inline ResultRecord run_job(const BenchJob& job, const ExperimentSpec& spec) {
    ResultRecord rec;
    rec.method = job.method;
    rec.l = job.l;
    rec.m = job.m;
    rec.n = job.n;
    rec.p = job.p;
    rec.lambda = job.lambda;
    rec.seed = job.seed;
    try {
        ProblemInstance inst = generate_instance(job.m, job.n, job.p, spec.noise, job.seed);
        DcProblem prob(LeastSquaresSmooth(std::move(inst.A), std::move(inst.b)),
                       make_regularizer(spec.reg, job.lambda, spec.reg_eps));
        OuterConfig cfg;
        cfg.eps = spec.tol;
        cfg.inner.theta = spec.theta;
        cfg.max_outer = spec.max_outer;
        const SolveResult result = run_method(job.method, prob, Vector::Zero(prob.dim()), cfg);
        rec.status = to_string(result.trace.status);
        rec.outer_iters = result.trace.outer_iters;
        rec.total_inner_iters = result.trace.total_inner_iters;
        rec.f_final = result.trace.f_final;
        rec.criticality = result.trace.criticality;
        rec.wall_time_ms = result.trace.wall_ms;
    } catch (const std::exception& e) {
        std::string what = e.what();
        for (char& c : what)
            if (c == ',' || c == '\n' || c == '\r') c = ';';
        rec.status = "Error: " + what;
        rec.f_final = std::nan("");
        rec.criticality = std::nan("");
    }
    return rec;
}

// DCPROX_THREADS caps the worker count; 0 when the variable is unset.
inline int bench_thread_cap() {
    if (const char* env = std::getenv("DCPROX_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 0;
}

// Runs every (method x cell x seed) combination. Jobs execute on a small
// worker pool, each writing into its own slot, so result content does not
// depend on scheduling; rows are then sorted by (method, l, lambda, seed).
inline std::vector<ResultRecord> run_bench(const ExperimentSpec& spec, int threads = 0) {
    const std::vector<BenchJob> jobs = expand_jobs(spec);
    std::vector<ResultRecord> records(jobs.size());

    const unsigned hw = std::thread::hardware_concurrency();
    int workers = threads > 0 ? threads : (hw > 0 ? static_cast<int>(hw) : 1);
    if (const int cap = bench_thread_cap(); cap > 0) workers = std::min(workers, cap);
    workers = std::min<int>(workers, static_cast<int>(jobs.size()));

    std::atomic<std::size_t> cursor{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) return;
            records[i] = run_job(jobs[i], spec);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
        return std::tie(a.method, a.l, a.lambda, a.seed) < std::tie(b.method, b.l, b.lambda, b.seed);
    });
    return records;
}

inline const char* kResultCsvHeader =
    "method,l,m,n,p,lambda,seed,status,outer_iters,total_inner_iters,f_final,criticality,"
    "wall_time_ms";

// One CSV with all data rows followed by per-cell median summary rows
// (seed column holds "median", status holds "summary"). Medians are computed
// over Converged rows only; cells with no converged row emit empty fields.
inline void write_results_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
    using detail::format_double;
    os << "# dcprox bench results\n";
    os << "# summary rows: seed=median, status=summary; medians are computed over rows with "
          "status=Converged only\n";
    os << kResultCsvHeader << '\n';
    for (const auto& r : records) {
        os << r.method << ',' << r.l << ',' << r.m << ',' << r.n << ',' << r.p << ','
           << format_double(r.lambda) << ',' << r.seed << ',' << r.status << ',' << r.outer_iters
           << ',' << r.total_inner_iters << ',' << format_double(r.f_final) << ','
           << format_double(r.criticality) << ',' << format_double(r.wall_time_ms) << '\n';
    }

    // cell key: (method, l, lambda); dims repeated for readability
    std::map<std::tuple<std::string, int, double>, std::vector<const ResultRecord*>> cells;
    for (const auto& r : records) cells[{r.method, r.l, r.lambda}].push_back(&r);
    for (const auto& [key, rows] : cells) {
        std::vector<double> outer, inner, f, crit, wall;
        for (const ResultRecord* r : rows) {
            if (r->status != "Converged") continue;
            outer.push_back(static_cast<double>(r->outer_iters));
            inner.push_back(static_cast<double>(r->total_inner_iters));
            f.push_back(r->f_final);
            crit.push_back(r->criticality);
            wall.push_back(r->wall_time_ms);
        }
        const ResultRecord* first = rows.front();
        os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << first->m << ',' << first->n
           << ',' << first->p << ',' << format_double(std::get<2>(key)) << ",median,summary,";
        if (outer.empty()) {
            os << ",,,,\n";
        } else {
            os << format_double(detail::median(outer)) << ',' << format_double(detail::median(inner))
               << ',' << format_double(detail::median(f)) << ','
               << format_double(detail::median(crit)) << ','
               << format_double(detail::median(wall)) << '\n';
        }
    }
}

inline nlohmann::ordered_json record_to_json(const ResultRecord& rec) {
    nlohmann::ordered_json j;
    j["method"] = rec.method;
    j["l"] = rec.l;
    j["m"] = rec.m;
    j["n"] = rec.n;
    j["p"] = rec.p;
    j["lambda"] = rec.lambda;
    j["seed"] = rec.seed;
    j["status"] = rec.status;
    j["outer_iters"] = rec.outer_iters;
    j["total_inner_iters"] = rec.total_inner_iters;
    j["f_final"] = rec.f_final;
    j["criticality"] = rec.criticality;
    j["wall_time_ms"] = rec.wall_time_ms;
    return j;
}

inline ExperimentSpec parse_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    if (j.contains("scales")) spec.scales = j.at("scales").get<std::vector<int>>();
    if (j.contains("shrink")) spec.shrink = j.at("shrink").get<double>();
    if (j.contains("lambdas")) spec.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("regularizer")) spec.reg = reg_kind_from_string(j.at("regularizer").get<std::string>());
    if (j.contains("epsilon")) spec.reg_eps = j.at("epsilon").get<double>();
    if (j.contains("seeds_per_cell")) spec.seeds_per_cell = j.at("seeds_per_cell").get<int>();
    if (j.contains("seed_base")) spec.seed_base = j.at("seed_base").get<std::uint64_t>();
    if (j.contains("methods")) spec.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("noise")) spec.noise = j.at("noise").get<double>();
    if (j.contains("tol")) spec.tol = j.at("tol").get<double>();
    if (j.contains("theta")) spec.theta = j.at("theta").get<double>();
    if (j.contains("max_outer")) spec.max_outer = j.at("max_outer").get<int>();
    return spec;
}

}  // namespace dcprox
