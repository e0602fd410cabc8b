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

TEST_CASE("coupling from zero potentials is the kernel") {
    Rng rng(201);
    const auto model = random_model(rng, {2, 3, 2});
    const auto q = coupling_from_potentials(model, zero_family<double>(model.sizes()));
    CHECK((q.log_density - model.kernel().log_values()).cwiseAbs().maxCoeff() == 0.0);
    double direct = 0;
    const VectorX<double> K = model.kernel().values();
    brute_loop(model.sizes(), [&](Index k, const std::vector<Index>& idx) {
        double m = 1;
        for (std::size_t j = 0; j < idx.size(); ++j)
            m *= model.space(j).weights()[idx[j]];
        direct += K[k] * m;
    });
    CHECK(std::abs(q.mass - direct) <= 1e-13 * direct);
    CHECK(relative_entropy(q, model.kernel(), model.spaces()) == doctest::Approx(-q.mass).epsilon(1e-13));
}

TEST_CASE("one-point coupling") {
    const auto model = one_point_model(2.0);
    const auto q = coupling_from_potentials(model, fam({{std::log(3.0)}, {0}}));
    CHECK(std::exp(q.log_density[0]) == doctest::Approx(6.0));
    CHECK(q.mass == doctest::Approx(6.0));
    const auto m = marginals_of(q, model.spaces());
    CHECK(m[0][0] == doctest::Approx(6.0));
    CHECK(m[1][0] == doctest::Approx(6.0));

    const auto k = coupling_from_potentials(model, fam({{0}, {0}}));
    CHECK(relative_entropy(k, model.kernel(), model.spaces()) == doctest::Approx(-2.0));
    CHECK(duality_gap(model, fam({{0}, {0}}), fam({{2}, {2}})) == doctest::Approx(0.0));

    const MarginalFamily<double> mu(model.spaces(), fam({{2}, {2}}));
    const auto p = product_feasible_coupling(mu, model.spaces());
    CHECK(std::exp(p.log_density[0]) == doctest::Approx(2.0));
}

TEST_CASE("constant kernel marginals") {
    const auto model = constant_model({2, 3, 2});
    const auto q = coupling_from_potentials(model, zero_family<double>(model.sizes()));
    for (const auto& m : marginals_of(q, model.spaces()))
        CHECK((m.array() - 1.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("two paths: marginals of the coupling equal T(phi)") {
    Rng rng(203);
    for (int trial = 0; trial < 5; ++trial) {
        const auto model = random_model(rng, {3, 2, 4});
        const auto phi = random_family(rng, model.sizes(), 2.0);
        const auto q = coupling_from_potentials(model, phi);
        const auto m = marginals_of(q, model.spaces());
        CHECK(max_rel_error(m, apply_T(model, phi)) <= 1e-13);
        for (std::size_t i = 0; i < m.size(); ++i)
            CHECK(std::abs(weighted_mass(model.space(i), m[i]) - q.mass) <= 1e-12 * q.mass);
    }
}

TEST_CASE("strong duality at a planted solution") {
    Rng rng(207);
    for (int trial = 0; trial < 5; ++trial) {
        const auto model = random_model(rng, {3, 3, 2});
        const auto phi = random_potential_in_E(rng, model);
        const auto mu = planted_target(model, phi);
        const auto q = coupling_from_potentials(model, phi);
        CHECK(max_abs(marginals_of(q, model.spaces()) - mu.densities()) <= 1e-8);
        const double H = relative_entropy(q, model.kernel(), model.spaces());
        CHECK(std::abs(H - dual_objective(model, phi, mu.densities())) <= 1e-10);
        CHECK(std::abs(duality_gap(model, phi, mu.densities())) <= 1e-10);
    }
}

TEST_CASE("product coupling is feasible and bounds the dual from above") {
    Rng rng(211);
    for (int trial = 0; trial < 5; ++trial) {
        const auto model = random_model(rng, {2, 4, 3});
        const auto mu = planted_target(model, random_potential_in_E(rng, model));
        const auto p = product_feasible_coupling(mu, model.spaces());
        CHECK(p.mass == doctest::Approx(mu.mass()).epsilon(1e-14));
        const auto m = marginals_of(p, model.spaces());
        CHECK(max_abs(m - mu.densities()) <= 1e-12 * max_abs(mu.densities()));
        const double H = relative_entropy(p, model.kernel(), model.spaces());
        for (int k = 0; k < 10; ++k) {
            const auto phi = random_family(rng, model.sizes(), 2.0);
            CHECK(H >= dual_objective(model, phi, mu.densities()) - 1e-10);
        }
    }
    // Unit marginals on probability weights: product coupling is identically 1.
    const auto cube = constant_model({2, 2});
    const MarginalFamily<double> ones(cube.spaces(), fam({{1, 1}, {1, 1}}));
    const auto p = product_feasible_coupling(ones, cube.spaces());
    CHECK(p.log_density.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("shape errors") {
    const auto model = one_point_model();
    const auto q = coupling_from_potentials(model, fam({{0}, {0}}));
    const auto other = constant_model({2, 2});
    CHECK_THROWS_AS(marginals_of(q, other.spaces()), Error);
    CHECK_THROWS_AS(relative_entropy(q, other.kernel(), other.spaces()), Error);
}
