#pragma once

#include "mms/primal_entropy.hpp"
#include "mms/solvers.hpp"
#include "mms/stability.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mms::io {

struct KernelRecord {
    std::vector<Index> shape;
    std::string order = "row-major";
    std::vector<double> data;
};

struct GibbsRecord {
    std::vector<Index> shape;
    std::string order = "row-major";
    std::vector<double> cost_data;
    double epsilon = 1.0;
};

/// Problem file: exactly one of `kernel` / `gibbs` is set.
struct ProblemDocument {
    std::string version = "1";
    std::vector<std::vector<double>> spaces;
    std::optional<KernelRecord> kernel;
    std::optional<GibbsRecord> gibbs;
    std::vector<std::vector<double>> marginals;
};

/// Input of the `gibbs` subcommand: a problem document carrying a bare
/// `cost` record {shape, order, data} instead of a kernel.
struct CostDocument {
    std::string version = "1";
    std::vector<std::vector<double>> spaces;
    KernelRecord cost;
    std::vector<std::vector<double>> marginals;
};

struct SolutionDocument {
    std::vector<std::vector<double>> potentials;
    std::string gauge = "mean-zero";
    double residual_linf = 0;
    double dual_value = 0;
    double entropy_value = 0;
    double duality_gap = 0;
    SolveReport<double> report;
};

/// Strict parse; throws ParseError, SchemaError, or any validation error.
ProblemDocument parse_problem(const std::string& text);
ProblemDocument read_problem(const std::filesystem::path& path);
std::string dump_problem(const ProblemDocument& doc);

CostDocument parse_cost(const std::string& text);
CostDocument read_cost(const std::filesystem::path& path);

ValidatedProblem<double> to_problem(const ProblemDocument& doc);
ProblemDocument from_problem(const ValidatedProblem<double>& problem);

/// Materialize exp(-c / epsilon) into a kernel record.
ProblemDocument materialize_gibbs(const CostDocument& cost, double epsilon);

SolutionDocument make_solution(const ValidatedProblem<double>& problem, const SolveResult<double>& result);
std::string dump_solution(const SolutionDocument& doc);
SolutionDocument parse_solution(const std::string& text);
void write_solution(const SolutionDocument& doc, const std::filesystem::path& path);

std::string dump_stability(const StabilityReport& report);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace mms::io
