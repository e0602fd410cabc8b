// mmschro: command-line front end for the multi-marginal Schrodinger solver.

#include "mms/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <random>

namespace {

using namespace mms;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitCheckFailed = 3;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NotConverged:
    case ErrorKind::LineSearchFailed:
    case ErrorKind::AllTrialsFailed:
        return kExitNotConverged;
    default:
        return kExitValidation;
    }
}

Method parse_method(const std::string& s) {
    if (s == "sinkhorn")
        return Method::Sinkhorn;
    if (s == "newton")
        return Method::Newton;
    return Method::Hybrid;
}

int run_solve(const std::string& path, const std::string& method, double tol, int max_iter,
              const std::string& out) {
    const auto problem = io::to_problem(io::read_problem(path));
    SolverConfig<double> config;
    config.method = parse_method(method);
    config.tolerance = tol;
    config.max_iterations = max_iter;
    const auto result = solve(problem.model, problem.target, config);
    const auto doc = io::make_solution(problem, result);
    if (out.empty())
        std::cout << io::dump_solution(doc);
    else
        io::write_solution(doc, out);
    std::cerr << "method " << to_string(result.report.method_used) << ", iterations " << result.report.iterations
              << ", residual " << doc.residual_linf << ", gap " << doc.duality_gap << "\n";
    if (!result.report.converged) {
        std::cerr << "solve: " << to_string(result.report.status) << "\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

Family<double> random_family(const std::vector<Index>& sizes, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Family<double> f;
    for (Index n : sizes) {
        VectorX<double> v(n);
        for (Index x = 0; x < n; ++x)
            v[x] = dist(rng);
        f.push_back(v);
    }
    return f;
}

struct CheckRow {
    std::string name;
    double value;
    double threshold;
    bool pass;
};

int run_check_jacobian(const std::string& path, const std::string& at, std::uint64_t seed) {
    const auto problem = io::to_problem(io::read_problem(path));
    const auto& model = problem.model;
    const auto& spaces = model.spaces();
    const auto sizes = model.sizes();
    const std::size_t n = model.rank();

    Family<double> phi = zero_family<double>(sizes);
    if (at == "solution") {
        const auto result = solve(model, problem.target, SolverConfig<double>{});
        if (!result.report.converged) {
            std::cerr << "check-jacobian: solve did not converge\n";
            return kExitNotConverged;
        }
        phi = result.potentials.values;
    }
    const auto J = build_jacobian(model, phi);
    std::vector<CheckRow> rows;

    const auto spec = kernel_spectrum(J);
    std::cout << "kernel dim = " << spec.kernel_dim << "\n";
    rows.push_back({"kernel dimension (expect N-1)", static_cast<double>(spec.kernel_dim),
                    static_cast<double>(n - 1), spec.kernel_dim == static_cast<Index>(n - 1)});
    rows.push_back({"kernel angle to blockwise constants", spec.kernel_angle, 1e-8, spec.kernel_angle <= 1e-8});
    const double rel_min = spec.smallest_nonzero / spec.singular_values[0];
    rows.push_back({"smallest nonzero / largest singular value", rel_min, 1e-6, rel_min > 1e-6});

    std::mt19937_64 rng(seed);
    double worst_range = 0, worst_fd = 0, worst_roundtrip = 0;
    const auto T0 = apply_T(model, phi);
    for (int k = 0; k < 10; ++k) {
        const auto h = random_family(sizes, rng);
        worst_range = std::max(worst_range, range_check(J, apply_Ttilde_prime(J, h)));

        const double t = 1e-5;
        const auto fd = (1.0 / (2 * t)) * (apply_T(model, phi + t * h) - apply_T(model, phi - t * h));
        const auto an = apply_T_prime(J, h);
        worst_fd = std::max(worst_fd, max_abs(fd - an) / max_abs(an));

        const auto h0 = gauge_project_E(spaces, h).values;
        const auto back = solve_in_E(J, apply_T_prime(J, h0));
        worst_roundtrip = std::max(worst_roundtrip, max_abs(back.values - h0));
    }
    rows.push_back({"range condition of T~'(phi) h", worst_range, 1e-12, worst_range <= 1e-12});
    rows.push_back({"T' vs central differences (relative)", worst_fd, 1e-6, worst_fd <= 1e-6});
    rows.push_back({"solve_in_E round trip (L-inf)", worst_roundtrip, 1e-10, worst_roundtrip <= 1e-10});

    bool all = true;
    for (const auto& r : rows) {
        std::cout << (r.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(44) << r.name << std::right
                  << std::setw(14) << std::setprecision(4) << std::scientific << r.value << "  (threshold "
                  << r.threshold << ")\n"
                  << std::defaultfloat;
        all = all && r.pass;
    }
    return all ? kExitOk : kExitCheckFailed;
}

int run_stability(const std::string& path, double band, int trials, std::uint64_t seed, double mass,
                  const std::string& out) {
    const auto problem = io::to_problem(io::read_problem(path));
    StabilityOptions options;
    options.mass = mass;
    const auto report = lipschitz_experiment(problem.model, band, trials, seed, options);
    const auto text = io::dump_stability(report);
    if (out.empty())
        std::cout << text;
    else
        io::write_text(out, text);
    std::cerr << "pairs " << report.pairs.size() << ", failures " << report.failures << ", skipped "
              << report.skipped << ", R_M " << report.max_potential_sup << "\n";
    return report.failures > 0 ? kExitNotConverged : kExitOk;
}

int run_gibbs(const std::string& path, double epsilon, const std::string& out) {
    const auto doc = io::materialize_gibbs(io::read_cost(path), epsilon);
    io::write_text(out, io::dump_problem(doc));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-marginal Schrodinger system solver"};
    app.require_subcommand(1);

    std::string problem_path, method = "hybrid", out, at = "solution";
    double tol = 1e-10, band = 2.0, epsilon = 1.0, mass = 1.0;
    int max_iter = 10000, trials = 10;
    std::uint64_t seed = 0;

    auto* solve_cmd = app.add_subcommand("solve", "Solve the Schrodinger system for a problem file");
    solve_cmd->add_option("problem", problem_path, "Problem JSON")->required();
    solve_cmd->add_option("--method", method, "sinkhorn|newton|hybrid")
        ->check(CLI::IsMember({"sinkhorn", "newton", "hybrid"}));
    solve_cmd->add_option("--tol", tol, "L-inf residual tolerance")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--max-iter", max_iter, "Iteration budget")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--out", out, "Write the solution document here");

    auto* check_cmd = app.add_subcommand("check-jacobian", "Verify kernel, range and derivative structure");
    check_cmd->add_option("problem", problem_path, "Problem JSON")->required();
    check_cmd->add_option("--at", at, "Linearization point")->check(CLI::IsMember({"solution", "zero"}));
    check_cmd->add_option("--seed", seed, "Seed for random directions");

    auto* stab_cmd = app.add_subcommand("stability", "Empirical Lipschitz and a-priori bounds");
    stab_cmd->add_option("problem", problem_path, "Problem template JSON (marginals ignored)")->required();
    stab_cmd->add_option("--band", band, "Band parameter M >= 1")->required();
    stab_cmd->add_option("--trials", trials, "Number of sampled pairs")->required();
    stab_cmd->add_option("--seed", seed, "Sampling seed")->required();
    stab_cmd->add_option("--mass", mass, "Common mass of sampled marginals");
    stab_cmd->add_option("--out", out, "Write the report here");

    auto* gibbs_cmd = app.add_subcommand("gibbs", "Materialize K = exp(-c/epsilon) into a problem file");
    gibbs_cmd->add_option("cost", problem_path, "Cost JSON")->required();
    gibbs_cmd->add_option("--epsilon", epsilon, "Temperature")->required()->check(CLI::PositiveNumber);
    gibbs_cmd->add_option("--out", out, "Output problem JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*solve_cmd)
            return run_solve(problem_path, method, tol, max_iter, out);
        if (*check_cmd)
            return run_check_jacobian(problem_path, at, seed);
        if (*stab_cmd)
            return run_stability(problem_path, band, trials, seed, mass, out);
        if (*gibbs_cmd)
            return run_gibbs(problem_path, epsilon, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
