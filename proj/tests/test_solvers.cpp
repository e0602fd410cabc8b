#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

using namespace mms;
using namespace mms::testing;

namespace {

Family<double> fam(std::initializer_list<std::initializer_list<double>> lists) {
    Family<double> f;
    for (auto l : lists) {
        VectorX<double> v(static_cast<Index>(l.size()));
        Index i = 0;
        for (double x : l)
            v[i++] = x;
        f.push_back(v);
    }
    return f;
}

SolverConfig<double> config_for(Method m, double tol = 1e-10) {
    SolverConfig<double> c;
    c.method = m;
    c.tolerance = tol;
    return c;
}

} // namespace

TEST_CASE("sinkhorn_step examples") {
    Spaces<double> spaces{DiscreteSpace<double>::uniform(2), DiscreteSpace<double>::uniform(2)};
    VectorX<double> k(4);
    k << 1, 2, 2, 1;
    KernelModel<double> model(spaces, KernelTensor<double>::from_values({2, 2}, k));
    auto phi = sinkhorn_step(model, zero_family<double>({2, 2}), fam({{1, 1}, {1, 1}}), 0);
    CHECK(phi[0][0] == doctest::Approx(-std::log(1.5)));
    CHECK(phi[0][1] == doctest::Approx(-std::log(1.5)));
    CHECK(phi[1].cwiseAbs().maxCoeff() == 0.0);

    const auto one = one_point_model(2.0);
    auto p = sinkhorn_step(one, fam({{5}, {0}}), fam({{2}, {2}}), 0);
    CHECK(std::abs(p[0][0]) < 1e-15);
}

TEST_CASE("sinkhorn_step solves its equation exactly and never decreases the dual") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const auto model = random_model(rng, {3, 4, 2});
        const auto mu = planted_target(model, random_potential_in_E(rng, model)).densities();
        auto phi = random_family(rng, model.sizes());
        double dual = dual_objective(model, phi, mu);
        for (int sweep = 0; sweep < 4; ++sweep)
            for (std::size_t i = 0; i < 3; ++i) {
                phi = sinkhorn_step(model, phi, mu, i);
                const auto T = apply_T(model, phi);
                CHECK((T[i] - mu[i]).cwiseAbs().maxCoeff() <= 1e-13 * mu[i].cwiseAbs().maxCoeff());
                const double next = dual_objective(model, phi, mu);
                CHECK(next >= dual - 1e-12);
                dual = next;
            }
    }
}

TEST_CASE("constant kernel, unit marginals: already solved") {
    const auto model = constant_model({2, 2, 2});
    const MarginalFamily<double> mu(model.spaces(), fam({{1, 1}, {1, 1}, {1, 1}}));
    const auto res = sinkhorn_solve(model, mu, config_for(Method::Sinkhorn));
    CHECK(res.report.converged);
    CHECK(res.report.iterations <= 1);
    CHECK(max_abs(res.potentials.values) < 1e-14);
}

TEST_CASE("planted recovery with each method") {
    Rng rng(103);
    for (auto method : {Method::Sinkhorn, Method::Newton, Method::Hybrid}) {
        const auto model = random_model(rng, {3, 4, 3});
        const auto phi_star = random_potential_in_E(rng, model);
        const auto mu = planted_target(model, phi_star);
        const auto res = solve(model, mu, config_for(method));
        CHECK(res.report.converged);
        CHECK(res.report.method_used == method);
        CHECK(max_abs(res.potentials.values - phi_star) <= 1e-8);
        CHECK(mean_zero_violation(model.spaces(), res.potentials.values) <= 1e-12);
        // Independent residual re-evaluation through the brute-force sum.
        CHECK(max_abs(brute_force_T(model, res.potentials.values) - mu.densities()) <= 1e-9);
    }
}

TEST_CASE("Sinkhorn dual history is nondecreasing") {
    Rng rng(107);
    const auto model = random_model(rng, {4, 3, 2, 2});
    const auto mu = planted_target(model, random_potential_in_E(rng, model));
    const auto res = sinkhorn_solve(model, mu, config_for(Method::Sinkhorn));
    REQUIRE(res.report.converged);
    for (std::size_t k = 1; k < res.report.dual_history.size(); ++k)
        CHECK(res.report.dual_history[k] >= res.report.dual_history[k - 1] - 1e-12);
}

TEST_CASE("uniqueness across initializations and methods") {
    Rng rng(109);
    const auto model = random_model(rng, {3, 3, 4});
    const auto mu = planted_target(model, random_potential_in_E(rng, model));
    std::vector<Family<double>> outs;
    for (int k = 0; k < 3; ++k) {
        const auto init = random_family(rng, model.sizes(), 2.0);
        const auto res = sinkhorn_solve(model, mu, config_for(Method::Sinkhorn), init);
        REQUIRE(res.report.converged);
        outs.push_back(res.potentials.values);
    }
    outs.push_back(newton_solve(model, mu, config_for(Method::Newton)).potentials.values);
    outs.push_back(hybrid_solve(model, mu, config_for(Method::Hybrid)).potentials.values);
    for (std::size_t a = 0; a < outs.size(); ++a)
        for (std::size_t b = a + 1; b < outs.size(); ++b)
            CHECK(max_abs(outs[a] - outs[b]) <= 1e-9);
}

TEST_CASE("Newton from a nearby point and from the exact solution") {
    Rng rng(113);
    const auto model = random_model(rng, {3, 4, 2});
    const auto phi_star = random_potential_in_E(rng, model);
    const auto mu = planted_target(model, phi_star);
    auto init = phi_star + random_family(rng, model.sizes(), 1e-2);
    auto res = newton_solve(model, mu, config_for(Method::Newton, 1e-12), init);
    CHECK(res.report.converged);
    CHECK(res.report.iterations <= 5);
    CHECK(max_abs(res.potentials.values - phi_star) <= 1e-10);
    for (std::size_t k = 1; k < res.report.residual_history.size(); ++k)
        CHECK(res.report.residual_history[k] <= res.report.residual_history[k - 1]);

    const auto one = one_point_model(2.0);
    const MarginalFamily<double> mu1(one.spaces(), fam({{2}, {2}}));
    res = newton_solve(one, mu1, config_for(Method::Newton));
    CHECK(res.report.converged);
    CHECK(res.report.iterations == 0);
}

TEST_CASE("hybrid switch degenerates to pure runs") {
    Rng rng(127);
    const auto model = random_model(rng, {3, 3});
    const auto mu = planted_target(model, random_potential_in_E(rng, model, 0.5));
    auto cfg = config_for(Method::Hybrid);

    cfg.hybrid_switch = 1e6;
    auto res = hybrid_solve(model, mu, cfg);
    CHECK(res.report.converged);
    CHECK(res.report.method_used == Method::Hybrid);
    CHECK(res.report.switch_index == std::size_t(1)); // no Sinkhorn sweeps

    cfg.hybrid_switch = 1e-12;
    res = hybrid_solve(model, mu, cfg);
    CHECK(res.report.converged);
    CHECK(res.report.step_sizes.empty()); // no Newton steps
    CHECK(res.report.switch_index == res.report.residual_history.size());
}

TEST_CASE("NotConverged returns the best iterate with a report") {
    Rng rng(131);
    const auto model = random_model(rng, {4, 4, 4});
    const auto mu = planted_target(model, random_potential_in_E(rng, model, 2.0));
    auto cfg = config_for(Method::Sinkhorn, 1e-14);
    cfg.max_iterations = 2;
    const auto res = sinkhorn_solve(model, mu, cfg);
    CHECK_FALSE(res.report.converged);
    CHECK(res.report.status == SolveStatus::NotConverged);
    CHECK(res.report.iterations == 2);
    CHECK(res.report.residual_history.size() == 3);
    CHECK(res.report.residual_history.back() < res.report.residual_history.front());
}

TEST_CASE("randomized sweep order is reproducible") {
    Rng rng(137);
    const auto model = random_model(rng, {3, 2, 3});
    const auto mu = planted_target(model, random_potential_in_E(rng, model));
    auto cfg = config_for(Method::Sinkhorn);
    cfg.randomized_order = true;
    cfg.seed = 99;
    const auto a = sinkhorn_solve(model, mu, cfg);
    const auto b = sinkhorn_solve(model, mu, cfg);
    CHECK(a.report.residual_history == b.report.residual_history);
    CHECK(a.report.converged);
}

TEST_CASE("config validation") {
    const auto one = one_point_model(2.0);
    const MarginalFamily<double> mu(one.spaces(), fam({{2}, {2}}));
    auto cfg = config_for(Method::Newton);
    cfg.backtracking = 1.0;
    CHECK_THROWS_AS(solve(one, mu, cfg), Error);
    cfg = config_for(Method::Sinkhorn, -1.0);
    CHECK_THROWS_AS(solve(one, mu, cfg), Error);
}

TEST_CASE("existence: random band marginals are solvable") {
    Rng rng(139);
    const auto model = random_model(rng, {4, 3, 3});
    for (int trial = 0; trial < 5; ++trial) {
        Family<double> dens;
        for (std::size_t i = 0; i < 3; ++i) {
            VectorX<double> v(model.space(i).size());
            for (Index x = 0; x < v.size(); ++x)
                v[x] = uniform(rng, 0.1, 10.0);
            dens.push_back(v / weighted_mass(model.space(i), v));
        }
        const MarginalFamily<double> mu(model.spaces(), dens);
        const auto res = solve(model, mu, config_for(Method::Hybrid));
        CHECK(res.report.converged);
        CHECK(residual(model, res.potentials.values, mu.densities()).norm_inf <= 1e-10);
    }
}
