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

} // namespace

TEST_CASE("logT and T on the one-point instance") {
    const auto model = one_point_model(2.0);
    auto lt = apply_logT(model, fam({{0}, {0}}));
    CHECK(lt[0][0] == doctest::Approx(std::log(2.0)));
    CHECK(lt[1][0] == doctest::Approx(std::log(2.0)));
    lt = apply_logT(model, fam({{std::log(3.0)}, {0}}));
    CHECK(lt[0][0] == doctest::Approx(std::log(6.0)));
    CHECK(lt[1][0] == doctest::Approx(std::log(6.0)));
    auto t = apply_T(model, fam({{0}, {0}}));
    CHECK(t[0][0] == doctest::Approx(2.0));
    CHECK(t[1][0] == doctest::Approx(2.0));
}

TEST_CASE("constant kernel on probability weights gives T = 1") {
    const auto model = constant_model({2, 2, 2});
    const auto phi = zero_family<double>(model.sizes());
    for (const auto& v : apply_logT(model, phi))
        CHECK(v.cwiseAbs().maxCoeff() < 1e-15);
    for (const auto& v : apply_T(model, phi))
        CHECK((v.array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("2x2 symmetric kernel: T_i = row sums / 2") {
    Spaces<double> spaces{DiscreteSpace<double>::uniform(2), DiscreteSpace<double>::uniform(2)};
    VectorX<double> k(4);
    k << 1, 2, 2, 1;
    KernelModel<double> model(spaces, KernelTensor<double>::from_values({2, 2}, k));
    const auto t = apply_T(model, zero_family<double>({2, 2}));
    for (const auto& v : t)
        for (Index x = 0; x < 2; ++x)
            CHECK(v[x] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("T matches the brute-force sum") {
    Rng rng(5);
    for (const auto& sizes : std::vector<std::vector<Index>>{{2, 3}, {3, 2, 4}, {2, 2, 3, 2}}) {
        const auto model = random_model(rng, sizes);
        const auto phi = random_family(rng, sizes, 2.0);
        CHECK(max_rel_error(apply_T(model, phi), brute_force_T(model, phi)) < 1e-13);
    }
}

TEST_CASE("residual and dual objective on small instances") {
    const auto model = one_point_model(2.0);
    auto r = residual(model, fam({{0}, {0}}), fam({{2}, {2}}));
    CHECK(r.norm_inf == 0.0);
    r = residual(model, fam({{0}, {0}}), fam({{1}, {1}}));
    CHECK(r.r[0][0] == doctest::Approx(1.0));
    CHECK(r.r[1][0] == doctest::Approx(1.0));
    CHECK(r.norm_inf == doctest::Approx(1.0));

    CHECK(dual_objective(model, fam({{0}, {0}}), fam({{2}, {2}})) == doctest::Approx(-2.0));
    for (double a : {-3.0, 0.5, 7.0})
        CHECK(dual_objective(model, fam({{a}, {-a}}), fam({{2}, {2}})) == doctest::Approx(-2.0));

    const auto cube = constant_model({2, 2, 2});
    const auto ones = fam({{1, 1}, {1, 1}, {1, 1}});
    CHECK(dual_objective(cube, zero_family<double>(cube.sizes()), ones) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(residual(model, fam({{0}, {0}}), fam({{1, 2}, {1}})), Error);
}

TEST_CASE("gauge projections") {
    const auto spaces = uniform_spaces({2, 2, 2});
    auto p = gauge_project_E(spaces, fam({{1, 1}, {2, 2}, {3, 3}}));
    CHECK(p.gauge == Gauge::MeanZero);
    CHECK(p[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(p[1].cwiseAbs().maxCoeff() == 0.0);
    CHECK(p[2][0] == doctest::Approx(6.0));
    CHECK(p.shifts->sum() == doctest::Approx(0.0));

    auto again = gauge_project_E(spaces, p.values);
    CHECK(again.shifts->cwiseAbs().maxCoeff() == 0.0);

    const auto two = uniform_spaces({2, 2});
    auto q = gauge_project_E(two, fam({{1, -1}, {5, 5}}));
    CHECK(q[0][0] == 1.0);
    CHECK(q[1][0] == 5.0);
    CHECK(q.shifts->cwiseAbs().maxCoeff() == 0.0);

    const auto one = one_point_model().spaces();
    auto u = gauge_to_unit_exp(one, fam({{3}, {-1}}));
    CHECK(u.gauge == Gauge::UnitExp);
    CHECK(u[0][0] == doctest::Approx(0.0));
    CHECK(u[1][0] == doctest::Approx(2.0));

    auto z = gauge_to_unit_exp(spaces, zero_family<double>({2, 2, 2}));
    for (const auto& v : z.values)
        CHECK(v.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gauge changes preserve T and hit their invariants") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = random_model(rng, {3, 2, 4});
        const auto phi = random_family(rng, model.sizes(), 2.0);
        const auto t0 = apply_T(model, phi);
        const auto e = gauge_project_E(model.spaces(), phi);
        const auto u = gauge_to_unit_exp(model.spaces(), phi);
        CHECK(mean_zero_violation(model.spaces(), e.values) <= 1e-12);
        CHECK(unit_exp_violation(model.spaces(), u.values) <= 1e-12);
        CHECK(std::abs(e.shifts->sum()) <= 1e-12);
        CHECK(std::abs(u.shifts->sum()) <= 1e-12);
        CHECK(max_rel_error(apply_T(model, e.values), t0) <= 1e-12);
        CHECK(max_rel_error(apply_T(model, u.values), t0) <= 1e-12);

        // Orbit invariance: both gauges project to the same MeanZero representative.
        const auto back = gauge_project_E(model.spaces(), u.values);
        CHECK(max_abs(back.values - e.values) <= 1e-12);
    }
}

TEST_CASE("T(phi) lies in F_++") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = random_model(rng, {4, 3, 2});
        const auto t = apply_T(model, random_family(rng, model.sizes(), 3.0));
        std::vector<double> masses;
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(t[i].minCoeff() > 0.0);
            masses.push_back(weighted_mass(model.space(i), t[i]));
        }
        const auto [lo, hi] = std::minmax_element(masses.begin(), masses.end());
        CHECK(*hi - *lo <= 1e-12 * *hi);
    }
}

TEST_CASE("apply_T reports overflow") {
    const auto model = one_point_model();
    CHECK_THROWS_AS(apply_T(model, fam({{800}, {0}})), Error);
    CHECK(apply_logT(model, fam({{800}, {0}}))[0][0] == doctest::Approx(800 + std::log(2.0)));
}

TEST_CASE("dual objective is concave along lines") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = random_model(rng, {3, 3, 2});
        const auto mu = planted_target(model, random_potential_in_E(rng, model)).densities();
        const auto phi = random_family(rng, model.sizes());
        const auto h = random_family(rng, model.sizes());
        std::vector<double> d;
        for (int k = 0; k <= 10; ++k)
            d.push_back(dual_objective(model, phi + (k / 10.0) * h, mu));
        for (int k = 1; k < 10; ++k)
            CHECK(d[k + 1] - 2 * d[k] + d[k - 1] <= 1e-10);
    }
}

TEST_CASE("dual gradient matches central differences") {
    Rng rng(31);
    const auto model = random_model(rng, {2, 3, 2});
    const auto mu = planted_target(model, random_potential_in_E(rng, model)).densities();
    const auto phi = random_family(rng, model.sizes(), 0.5);
    const auto T = apply_T(model, phi);
    const double t = 1e-5;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        for (Index x = 0; x < phi[i].size(); ++x) {
            auto plus = phi, minus = phi;
            plus[i][x] += t;
            minus[i][x] -= t;
            const double fd = (dual_objective(model, plus, mu) - dual_objective(model, minus, mu)) / (2 * t);
            const double exact = model.space(i).weights()[x] * (mu[i][x] - T[i][x]);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-3));
        }
    }
}
