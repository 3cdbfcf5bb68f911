// Command-line front end: instance generation, single solves, batch benchmarks.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dcprox/dcprox.hpp"

namespace {

using namespace dcprox;

struct GenArgs {
    std::uint64_t m = 0, n = 0, p = 0, seed = 1;
    double noise = 0.01;
    std::string out;
};

int cmd_gen(const GenArgs& args) {
    const ProblemInstance inst = generate_instance(args.m, args.n, args.p, args.noise, args.seed);
    const std::string bytes = serialize_instance(inst);
    {
        std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + args.out);
    }
    char digest[32];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    std::cout << "wrote " << args.out << " (" << bytes.size() << " bytes) digest fnv1a64:" << digest
              << "\n";
    return 0;
}

struct SolveArgs {
    std::string in;
    std::string method = "mbfgs-snewton";
    std::string reg = "l1l2";
    double lambda = 0.01;
    double eps_shift = 0.5;
    double theta = 0.99;
    double tol = 1e-5;
    int max_outer = 10000;
    std::string trace_path;
    std::string out_path;
};

int cmd_solve(const SolveArgs& args) {
    ProblemInstance inst = load_instance(args.in);

    ResultRecord rec;
    rec.method = args.method;
    rec.l = 0;  // standalone instance, not part of a scaled grid
    rec.m = inst.m;
    rec.n = inst.n;
    rec.p = inst.p;
    rec.lambda = args.lambda;
    rec.seed = inst.seed;

    DcProblem prob(LeastSquaresSmooth(std::move(inst.A), std::move(inst.b)),
                   make_regularizer(reg_kind_from_string(args.reg), args.lambda, args.eps_shift));

    OuterConfig cfg;
    cfg.eps = args.tol;
    cfg.inner.theta = args.theta;
    cfg.max_outer = args.max_outer;

    const SolveResult result = run_method(args.method, prob, Vector::Zero(prob.dim()), cfg);
    rec.status = to_string(result.trace.status);
    rec.outer_iters = result.trace.outer_iters;
    rec.total_inner_iters = result.trace.total_inner_iters;
    rec.f_final = result.trace.f_final;
    rec.criticality = result.trace.criticality;
    rec.wall_time_ms = result.trace.wall_ms;

    if (!args.trace_path.empty()) {
        std::ofstream trace(args.trace_path, std::ios::trunc);
        if (!trace) throw std::runtime_error("cannot open for writing: " + args.trace_path);
        trace << "k,f,d_norm,eta,inner_iters\n";
        for (const TraceRow& row : result.trace.rows)
            trace << row.k << ',' << dcprox::detail::format_double(row.f) << ','
                  << dcprox::detail::format_double(row.d_norm) << ','
                  << dcprox::detail::format_double(row.eta) << ',' << row.inner_iters << '\n';
    }

    const std::string json = record_to_json(rec).dump(2) + "\n";
    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out_path);
        out << json;
    }
    std::cout << json;
    return 0;
}

struct BenchArgs {
    std::string spec_path;
    std::string out_path;
    int threads = 0;  // 0: DCPROX_THREADS or hardware concurrency
};

int cmd_bench(const BenchArgs& args) {
    std::ifstream in(args.spec_path);
    if (!in) throw std::runtime_error("cannot open: " + args.spec_path);
    nlohmann::json j;
    in >> j;
    const ExperimentSpec spec = parse_spec(j);

    const std::vector<ResultRecord> records = run_bench(spec, args.threads);

    std::ostringstream csv;
    write_results_csv(csv, records);
    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out_path);
        out << csv.str();
        std::cout << "wrote " << args.out_path << " (" << records.size() << " rows)\n";
    } else {
        std::cout << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"difference-of-convex proximal Newton toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a random least squares instance");
    gen_cmd->add_option("--m", gen.m, "rows")->required();
    gen_cmd->add_option("--n", gen.n, "columns")->required();
    gen_cmd->add_option("--p", gen.p, "ground-truth sparsity")->required();
    gen_cmd->add_option("--seed", gen.seed, "64-bit seed");
    gen_cmd->add_option("--noise", gen.noise, "noise level (default 0.01)");
    gen_cmd->add_option("--out", gen.out, "output instance file")->required();

    SolveArgs solve;
    CLI::App* solve_cmd = app.add_subcommand("solve", "solve one instance from x0 = 0");
    solve_cmd->add_option("--in", solve.in, "instance file")->required();
    solve_cmd->add_option("--method", solve.method, "solver")
        ->check(CLI::IsMember({"mbfgs-snewton", "pdca", "pdcae"}));
    solve_cmd->add_option("--reg", solve.reg, "regularizer")
        ->check(CLI::IsMember({"l1l2", "logsum", "l1"}));
    solve_cmd->add_option("--lambda", solve.lambda, "regularization weight");
    solve_cmd->add_option("--eps-shift", solve.eps_shift, "log-sum shift parameter");
    solve_cmd->add_option("--theta", solve.theta, "inexactness parameter");
    solve_cmd->add_option("--tol", solve.tol, "relative step tolerance");
    solve_cmd->add_option("--max-outer", solve.max_outer, "outer iteration cap");
    solve_cmd->add_option("--trace", solve.trace_path, "write per-iteration CSV");
    solve_cmd->add_option("--out", solve.out_path, "write the result JSON to a file too");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run a benchmark grid from a JSON spec");
    bench_cmd->add_option("--spec", bench.spec_path, "experiment spec (JSON)")->required();
    bench_cmd->add_option("--out", bench.out_path, "results CSV path (stdout if omitted)");
    bench_cmd->add_option("--threads", bench.threads, "worker cap (DCPROX_THREADS otherwise)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (solve_cmd->parsed()) return cmd_solve(solve);
        if (bench_cmd->parsed()) return cmd_bench(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
