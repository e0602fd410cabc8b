#include "mms/io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mms::io {

using nlohmann::json;

namespace {

void expect_keys(const json& j, const std::string& where, const std::set<std::string>& required,
                 const std::set<std::string>& optional = {}) {
    if (!j.is_object())
        throw Error(ErrorKind::SchemaError, where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!required.count(key) && !optional.count(key))
            throw Error(ErrorKind::SchemaError, "unknown field '" + key + "' in " + where);
    for (const auto& key : required)
        if (!j.contains(key))
            throw Error(ErrorKind::SchemaError, "missing field '" + key + "' in " + where);
}

double as_double(const json& j, const std::string& where) {
    if (!j.is_number())
        throw Error(ErrorKind::SchemaError, where + " must be a number");
    return j.get<double>();
}

std::vector<double> as_doubles(const json& j, const std::string& where) {
    if (!j.is_array())
        throw Error(ErrorKind::SchemaError, where + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j)
        out.push_back(as_double(v, where));
    return out;
}

std::vector<std::vector<double>> as_double_lists(const json& j, const std::string& where) {
    if (!j.is_array())
        throw Error(ErrorKind::SchemaError, where + " must be an array of arrays");
    std::vector<std::vector<double>> out;
    for (const auto& v : j)
        out.push_back(as_doubles(v, where));
    return out;
}

std::vector<Index> as_shape(const json& j, const std::string& where) {
    if (!j.is_array())
        throw Error(ErrorKind::SchemaError, where + " must be an array of integers");
    std::vector<Index> out;
    for (const auto& v : j) {
        if (!v.is_number_integer() || v.get<long long>() <= 0)
            throw Error(ErrorKind::SchemaError, where + " entries must be positive integers");
        out.push_back(static_cast<Index>(v.get<long long>()));
    }
    return out;
}

std::string as_string(const json& j, const std::string& where) {
    if (!j.is_string())
        throw Error(ErrorKind::SchemaError, where + " must be a string");
    return j.get<std::string>();
}

void check_order(const std::string& order) {
    if (order != "row-major")
        throw Error(ErrorKind::SchemaError, "only order \"row-major\" is supported");
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

void check_version(const json& j) {
    if (as_string(j.at("version"), "version") != "1")
        throw Error(ErrorKind::SchemaError, "unsupported version");
}

KernelRecord parse_tensor_record(const json& j, const std::string& where) {
    expect_keys(j, where, {"shape", "order", "data"});
    KernelRecord r;
    r.shape = as_shape(j.at("shape"), where + ".shape");
    r.order = as_string(j.at("order"), where + ".order");
    check_order(r.order);
    r.data = as_doubles(j.at("data"), where + ".data");
    return r;
}

VectorX<double> to_vector(const std::vector<double>& v) {
    return Eigen::Map<const VectorX<double>>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const VectorX<double>& v) {
    return {v.data(), v.data() + v.size()};
}

Family<double> to_family(const std::vector<std::vector<double>>& lists) {
    Family<double> f;
    for (const auto& l : lists)
        f.push_back(to_vector(l));
    return f;
}

std::vector<std::vector<double>> to_lists(const Family<double>& f) {
    std::vector<std::vector<double>> out;
    for (const auto& v : f)
        out.push_back(to_std(v));
    return out;
}

json report_to_json(const SolveReport<double>& r) {
    json j;
    j["iterations"] = r.iterations;
    j["residual_history"] = r.residual_history;
    j["dual_history"] = r.dual_history;
    j["step_sizes"] = r.step_sizes;
    j["converged"] = r.converged;
    j["status"] = to_string(r.status);
    j["method_used"] = to_string(r.method_used);
    j["switch_index"] = r.switch_index ? json(*r.switch_index) : json(nullptr);
    return j;
}

Method parse_method(const std::string& s) {
    if (s == "sinkhorn")
        return Method::Sinkhorn;
    if (s == "newton")
        return Method::Newton;
    if (s == "hybrid")
        return Method::Hybrid;
    throw Error(ErrorKind::SchemaError, "unknown method '" + s + "'");
}

SolveStatus parse_status(const std::string& s) {
    if (s == "converged")
        return SolveStatus::Converged;
    if (s == "not-converged")
        return SolveStatus::NotConverged;
    if (s == "line-search-failed")
        return SolveStatus::LineSearchFailed;
    throw Error(ErrorKind::SchemaError, "unknown status '" + s + "'");
}

SolveReport<double> report_from_json(const json& j) {
    expect_keys(j, "report",
                {"iterations", "residual_history", "dual_history", "step_sizes", "converged", "status",
                 "method_used", "switch_index"});
    SolveReport<double> r;
    if (!j.at("iterations").is_number_integer())
        throw Error(ErrorKind::SchemaError, "report.iterations must be an integer");
    r.iterations = j.at("iterations").get<int>();
    r.residual_history = as_doubles(j.at("residual_history"), "report.residual_history");
    r.dual_history = as_doubles(j.at("dual_history"), "report.dual_history");
    r.step_sizes = as_doubles(j.at("step_sizes"), "report.step_sizes");
    if (!j.at("converged").is_boolean())
        throw Error(ErrorKind::SchemaError, "report.converged must be a boolean");
    r.converged = j.at("converged").get<bool>();
    r.status = parse_status(as_string(j.at("status"), "report.status"));
    r.method_used = parse_method(as_string(j.at("method_used"), "report.method_used"));
    if (!j.at("switch_index").is_null())
        r.switch_index = j.at("switch_index").get<std::size_t>();
    return r;
}

} // namespace

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    out.flush();
    if (!out)
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ProblemDocument parse_problem(const std::string& text) {
    const json j = parse_json(text);
    expect_keys(j, "problem", {"version", "spaces", "marginals"}, {"kernel", "gibbs"});
    check_version(j);
    const bool has_kernel = j.contains("kernel");
    const bool has_gibbs = j.contains("gibbs");
    if (has_kernel == has_gibbs)
        throw Error(ErrorKind::SchemaError, "exactly one of 'kernel' and 'gibbs' must be present");

    ProblemDocument doc;
    doc.spaces = as_double_lists(j.at("spaces"), "spaces");
    doc.marginals = as_double_lists(j.at("marginals"), "marginals");
    if (has_kernel) {
        doc.kernel = parse_tensor_record(j.at("kernel"), "kernel");
    } else {
        const json& g = j.at("gibbs");
        expect_keys(g, "gibbs", {"shape", "order", "cost_data", "epsilon"});
        GibbsRecord r;
        r.shape = as_shape(g.at("shape"), "gibbs.shape");
        r.order = as_string(g.at("order"), "gibbs.order");
        check_order(r.order);
        r.cost_data = as_doubles(g.at("cost_data"), "gibbs.cost_data");
        r.epsilon = as_double(g.at("epsilon"), "gibbs.epsilon");
        doc.gibbs = std::move(r);
    }
    to_problem(doc);
    return doc;
}

ProblemDocument read_problem(const std::filesystem::path& path) {
    return parse_problem(read_text(path));
}

std::string dump_problem(const ProblemDocument& doc) {
    json j;
    j["version"] = doc.version;
    j["spaces"] = doc.spaces;
    j["marginals"] = doc.marginals;
    if (doc.kernel)
        j["kernel"] = {{"shape", doc.kernel->shape}, {"order", doc.kernel->order}, {"data", doc.kernel->data}};
    if (doc.gibbs)
        j["gibbs"] = {{"shape", doc.gibbs->shape},
                      {"order", doc.gibbs->order},
                      {"cost_data", doc.gibbs->cost_data},
                      {"epsilon", doc.gibbs->epsilon}};
    return j.dump(2) + "\n";
}

CostDocument parse_cost(const std::string& text) {
    const json j = parse_json(text);
    expect_keys(j, "cost document", {"version", "spaces", "cost", "marginals"});
    check_version(j);
    CostDocument doc;
    doc.spaces = as_double_lists(j.at("spaces"), "spaces");
    doc.marginals = as_double_lists(j.at("marginals"), "marginals");
    doc.cost = parse_tensor_record(j.at("cost"), "cost");
    return doc;
}

CostDocument read_cost(const std::filesystem::path& path) {
    return parse_cost(read_text(path));
}

ValidatedProblem<double> to_problem(const ProblemDocument& doc) {
    Spaces<double> spaces;
    for (const auto& w : doc.spaces)
        spaces.emplace_back(to_vector(w));
    auto kernel = doc.kernel
                      ? KernelTensor<double>::from_values(doc.kernel->shape, to_vector(doc.kernel->data))
                      : build_gibbs_kernel(GibbsSpec<double>{doc.gibbs->shape, to_vector(doc.gibbs->cost_data),
                                                             doc.gibbs->epsilon});
    KernelModel<double> model(std::move(spaces), std::move(kernel));
    MarginalFamily<double> target(model.spaces(), to_family(doc.marginals));
    return ValidatedProblem<double>{std::move(model), std::move(target)};
}

ProblemDocument from_problem(const ValidatedProblem<double>& problem) {
    ProblemDocument doc;
    for (const auto& s : problem.model.spaces())
        doc.spaces.push_back(to_std(s.weights()));
    doc.kernel = KernelRecord{problem.model.shape(), "row-major", to_std(problem.model.kernel().values())};
    doc.marginals = to_lists(problem.target.densities());
    return doc;
}

ProblemDocument materialize_gibbs(const CostDocument& cost, double epsilon) {
    const auto kernel = build_gibbs_kernel(GibbsSpec<double>{cost.cost.shape, to_vector(cost.cost.data), epsilon});
    ProblemDocument doc;
    doc.spaces = cost.spaces;
    doc.marginals = cost.marginals;
    doc.kernel = KernelRecord{cost.cost.shape, "row-major", to_std(kernel.values())};
    to_problem(doc);
    return doc;
}

SolutionDocument make_solution(const ValidatedProblem<double>& problem, const SolveResult<double>& result) {
    const auto& model = problem.model;
    const auto& phi = result.potentials.values;
    const auto& mu = problem.target.densities();
    SolutionDocument doc;
    doc.potentials = to_lists(phi);
    doc.residual_linf = residual(model, phi, mu).norm_inf;
    doc.dual_value = dual_objective(model, phi, mu);
    doc.entropy_value = relative_entropy(coupling_from_potentials(model, phi), model.kernel(), model.spaces());
    doc.duality_gap = doc.entropy_value - doc.dual_value;
    doc.report = result.report;
    return doc;
}

std::string dump_solution(const SolutionDocument& doc) {
    json j;
    j["potentials"] = doc.potentials;
    j["gauge"] = doc.gauge;
    j["residual_linf"] = doc.residual_linf;
    j["dual_value"] = doc.dual_value;
    j["entropy_value"] = doc.entropy_value;
    j["duality_gap"] = doc.duality_gap;
    j["report"] = report_to_json(doc.report);
    return j.dump(2) + "\n";
}

SolutionDocument parse_solution(const std::string& text) {
    const json j = parse_json(text);
    expect_keys(j, "solution",
                {"potentials", "gauge", "residual_linf", "dual_value", "entropy_value", "duality_gap", "report"});
    SolutionDocument doc;
    doc.potentials = as_double_lists(j.at("potentials"), "potentials");
    doc.gauge = as_string(j.at("gauge"), "gauge");
    if (doc.gauge != "mean-zero")
        throw Error(ErrorKind::SchemaError, "gauge must be \"mean-zero\"");
    doc.residual_linf = as_double(j.at("residual_linf"), "residual_linf");
    doc.dual_value = as_double(j.at("dual_value"), "dual_value");
    doc.entropy_value = as_double(j.at("entropy_value"), "entropy_value");
    doc.duality_gap = as_double(j.at("duality_gap"), "duality_gap");
    doc.report = report_from_json(j.at("report"));
    return doc;
}

void write_solution(const SolutionDocument& doc, const std::filesystem::path& path) {
    write_text(path, dump_solution(doc));
}

std::string dump_stability(const StabilityReport& report) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json pairs = json::array();
    for (const auto& p : report.pairs)
        pairs.push_back({{"trial", p.trial},
                         {"distance_l2", p.distance_l2},
                         {"ratio_l2", p.ratio_l2},
                         {"ratio_linf", p.ratio_linf},
                         {"segment_max_op_norm", p.segment_max_op_norm}});
    json j;
    j["M"] = report.M;
    j["trials"] = report.trials;
    j["max_potential_sup"] = report.max_potential_sup;
    j["max_ratio_l2"] = opt(report.max_ratio_l2);
    j["max_ratio_linf"] = opt(report.max_ratio_linf);
    j["max_op_norm_l2"] = opt(report.max_op_norm_l2);
    j["failures"] = report.failures;
    j["skipped"] = report.skipped;
    j["pairs"] = pairs;
    return j.dump(2) + "\n";
}

} // namespace mms::io
