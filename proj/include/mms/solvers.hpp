#pragma once

#include "mms/jacobian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <type_traits>

namespace mms {

enum class Method { Sinkhorn, Newton, Hybrid };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::Sinkhorn: return "sinkhorn";
    case Method::Newton: return "newton";
    case Method::Hybrid: return "hybrid";
    }
    return "unknown";
}

enum class SolveStatus { Converged, NotConverged, LineSearchFailed };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::NotConverged: return "not-converged";
    case SolveStatus::LineSearchFailed: return "line-search-failed";
    }
    return "unknown";
}

template <typename Scalar>
struct SolverConfig {
    int max_iterations = 10000;
    Scalar tolerance = Scalar(1e-10);
    Method method = Method::Hybrid;
    Scalar backtracking = Scalar(0.5);
    Scalar sufficient_decrease = Scalar(1e-4);
    Scalar hybrid_switch = Scalar(1e-2);
    std::uint64_t seed = 0;
    bool randomized_order = false;
    Index dense_cap = kDefaultDenseCap;

    void validate() const {
        if (!(tolerance > Scalar(0)))
            throw Error(ErrorKind::InvalidArgument, "tolerance must be > 0");
        if (max_iterations < 1)
            throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
        if (!(backtracking > Scalar(0) && backtracking < Scalar(1)))
            throw Error(ErrorKind::InvalidArgument, "backtracking factor must be in (0, 1)");
    }
};

template <typename Scalar>
struct SolveReport {
    int iterations = 0;
    std::vector<Scalar> residual_history; // L-inf residual, entry 0 is the initial point
    std::vector<Scalar> dual_history;
    std::vector<Scalar> step_sizes;       // Newton only
    bool converged = false;
    SolveStatus status = SolveStatus::NotConverged;
    Method method_used = Method::Sinkhorn;
    std::optional<std::size_t> switch_index; // Hybrid: first Newton entry in the histories
};

template <typename Scalar>
struct SolveResult {
    PotentialFamily<Scalar> potentials;
    SolveReport<Scalar> report;
};

/// Exact solve of the i-th equation: phi_i <- log mu_i - log int K e^{sum_{j!=i} phi_j} dm_-i.
template <typename Scalar>
Family<Scalar> sinkhorn_step(const KernelModel<Scalar>& model, Family<Scalar> phi,
                             const Family<Scalar>& mu, std::size_t i) {
    model.check_family(phi);
    model.check_family(mu);
    const VectorX<Scalar> logT = apply_logT_component(model, phi, i);
    phi[i] = phi[i] + mu[i].array().log().matrix() - logT;
    return phi;
}

namespace detail {

template <typename Scalar>
void check_target(const KernelModel<Scalar>& model, const MarginalFamily<Scalar>& mu) {
    model.check_family(mu.densities());
}

template <typename Scalar>
Family<Scalar> initial_point(const KernelModel<Scalar>& model, const std::optional<Family<Scalar>>& init) {
    if (!init)
        return zero_family<Scalar>(model.sizes());
    model.check_family(*init);
    return *init;
}

} // namespace detail

template <typename Scalar>
SolveResult<Scalar> sinkhorn_solve(const KernelModel<Scalar>& model, const MarginalFamily<Scalar>& mu,
                                   const SolverConfig<Scalar>& config,
                                   const std::optional<Family<std::type_identity_t<Scalar>>>& init = std::nullopt) {
    config.validate();
    detail::check_target(model, mu);
    const auto& target = mu.densities();
    Family<Scalar> phi = gauge_project_E(model.spaces(), detail::initial_point(model, init)).values;

    SolveReport<Scalar> report;
    report.method_used = Method::Sinkhorn;
    Scalar r = residual(model, phi, target).norm_inf;
    report.residual_history.push_back(r);
    report.dual_history.push_back(dual_objective(model, phi, target));

    std::vector<std::size_t> order(model.rank());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::mt19937_64 rng(config.seed);

    while (!(r <= config.tolerance) && report.iterations < config.max_iterations) {
        if (config.randomized_order)
            std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order)
            phi = sinkhorn_step(model, std::move(phi), target, i);
        phi = gauge_project_E(model.spaces(), phi).values;
        ++report.iterations;
        r = residual(model, phi, target).norm_inf;
        report.residual_history.push_back(r);
        report.dual_history.push_back(dual_objective(model, phi, target));
        if (!std::isfinite(static_cast<double>(r)) || !all_finite(phi))
            break;
    }
    report.converged = r <= config.tolerance;
    report.status = report.converged ? SolveStatus::Converged : SolveStatus::NotConverged;
    return {gauge_project_E(model.spaces(), phi), std::move(report)};
}

template <typename Scalar>
SolveResult<Scalar> newton_solve(const KernelModel<Scalar>& model, const MarginalFamily<Scalar>& mu,
                                 const SolverConfig<Scalar>& config,
                                 const std::optional<Family<std::type_identity_t<Scalar>>>& init = std::nullopt) {
    config.validate();
    detail::check_target(model, mu);
    check_dense_cap(total_size(mu.densities()), config.dense_cap);
    const auto& target = mu.densities();
    Family<Scalar> phi = gauge_project_E(model.spaces(), detail::initial_point(model, init)).values;

    SolveReport<Scalar> report;
    report.method_used = Method::Newton;
    Residual<Scalar> res = residual(model, phi, target);
    report.residual_history.push_back(res.norm_inf);
    report.dual_history.push_back(dual_objective(model, phi, target));

    const Scalar min_step = std::pow(config.backtracking, 20);
    while (!(res.norm_inf <= config.tolerance) && report.iterations < config.max_iterations) {
        const auto J = build_jacobian(model, phi);
        PotentialFamily<Scalar> h;
        try {
            h = solve_in_E(J, project_to_F(model.spaces(), res.r), config.dense_cap);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NotInRange)
                throw;
            report.status = SolveStatus::LineSearchFailed;
            return {gauge_project_E(model.spaces(), phi), std::move(report)};
        }
        Scalar t(1);
        bool accepted = false;
        Family<Scalar> trial;
        Residual<Scalar> trial_res;
        while (t >= min_step) {
            trial = gauge_project_E(model.spaces(), phi - t * h.values).values;
            try {
                trial_res = residual(model, trial, target);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Overflow)
                    throw;
                t *= config.backtracking;
                continue;
            }
            if (trial_res.norm_inf <= (Scalar(1) - config.sufficient_decrease * t) * res.norm_inf) {
                accepted = true;
                break;
            }
            t *= config.backtracking;
        }
        if (!accepted) {
            report.status = SolveStatus::LineSearchFailed;
            return {gauge_project_E(model.spaces(), phi), std::move(report)};
        }
        phi = std::move(trial);
        res = std::move(trial_res);
        ++report.iterations;
        report.step_sizes.push_back(t);
        report.residual_history.push_back(res.norm_inf);
        report.dual_history.push_back(dual_objective(model, phi, target));
    }
    report.converged = res.norm_inf <= config.tolerance;
    report.status = report.converged ? SolveStatus::Converged : SolveStatus::NotConverged;
    return {gauge_project_E(model.spaces(), phi), std::move(report)};
}

/// Sinkhorn until the residual reaches hybrid_switch, then Newton.
template <typename Scalar>
SolveResult<Scalar> hybrid_solve(const KernelModel<Scalar>& model, const MarginalFamily<Scalar>& mu,
                                 const SolverConfig<Scalar>& config,
                                 const std::optional<Family<std::type_identity_t<Scalar>>>& init = std::nullopt) {
    config.validate();
    SolverConfig<Scalar> first = config;
    first.tolerance = std::max(config.hybrid_switch, config.tolerance);
    auto stage1 = sinkhorn_solve(model, mu, first, init);

    SolveResult<Scalar> out;
    auto& report = out.report;
    report.method_used = Method::Hybrid;
    report.iterations = stage1.report.iterations;
    report.residual_history = stage1.report.residual_history;
    report.dual_history = stage1.report.dual_history;

    if (!stage1.report.converged) {
        report.status = SolveStatus::NotConverged;
        out.potentials = std::move(stage1.potentials);
        return out;
    }
    auto stage2 = newton_solve(model, mu, config, stage1.potentials.values);
    report.switch_index = report.residual_history.size();
    report.iterations += stage2.report.iterations;
    // Newton's entry 0 repeats the Sinkhorn end point.
    report.residual_history.insert(report.residual_history.end(), stage2.report.residual_history.begin() + 1,
                                   stage2.report.residual_history.end());
    report.dual_history.insert(report.dual_history.end(), stage2.report.dual_history.begin() + 1,
                               stage2.report.dual_history.end());
    report.step_sizes = stage2.report.step_sizes;
    report.converged = stage2.report.converged;
    report.status = stage2.report.status;
    out.potentials = std::move(stage2.potentials);
    return out;
}

template <typename Scalar>
SolveResult<Scalar> solve(const KernelModel<Scalar>& model, const MarginalFamily<Scalar>& mu,
                          const SolverConfig<Scalar>& config,
                          const std::optional<Family<std::type_identity_t<Scalar>>>& init = std::nullopt) {
    switch (config.method) {
    case Method::Sinkhorn: return sinkhorn_solve(model, mu, config, init);
    case Method::Newton: return newton_solve(model, mu, config, init);
    case Method::Hybrid: return hybrid_solve(model, mu, config, init);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown method");
}

} // namespace mms
