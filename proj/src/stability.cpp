#include "mms/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

namespace mms {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t band_tag(double band) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &band, sizeof bits);
    return bits;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(base) ^ trial) ^ stream);
}

MarginalFamily<double> sample_marginals_in_band(const Spaces<double>& spaces, double M, double mass,
                                                std::uint64_t seed) {
    if (!(M >= 1.0))
        throw Error(ErrorKind::BandInfeasible, "band parameter M must be >= 1");
    const double lo = 1.0 / M;
    const double hi = M;
    if (!(mass >= lo && mass <= hi))
        throw Error(ErrorKind::BandInfeasible, "mass " + std::to_string(mass) + " outside [1/M, M]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    auto inside = [&](const VectorX<double>& v) {
        return (v.array() >= lo).all() && (v.array() <= hi).all();
    };

    Family<double> densities;
    for (const auto& space : spaces) {
        const Index n = space.size();
        if (M == 1.0) {
            densities.push_back(VectorX<double>::Constant(n, 1.0));
            continue;
        }
        VectorX<double> mu(n);
        bool accepted = false;
        for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
            VectorX<double> u(n);
            for (Index x = 0; x < n; ++x)
                u[x] = dist(rng);
            mu = u * (mass / weighted_mass(space, u));
            accepted = inside(mu);
        }
        // Pull toward the constant density until the band holds again.
        double a = 1.0;
        while (!accepted) {
            a *= 0.5;
            VectorX<double> pulled = (mass + a * (mu.array() - mass)).matrix();
            if (inside(pulled)) {
                mu = pulled;
                accepted = true;
            }
        }
        densities.push_back(mu);
    }
    return MarginalFamily<double>(spaces, std::move(densities));
}

double schroedinger_prime_norm(const KernelModel<double>& model, const MarginalFamily<double>& mu,
                               const SolverConfig<double>& config, const std::optional<Family<double>>& init) {
    auto result = solve(model, mu, config, init);
    if (!result.report.converged)
        throw Error(ErrorKind::NotConverged, "solve failed while evaluating S'(mu)");
    return restricted_inverse_norm(model, result.potentials.values, config.dense_cap);
}

StabilityReport lipschitz_experiment(const KernelModel<double>& model, double M, int trials, std::uint64_t seed,
                                     const StabilityOptions& options) {
    if (trials < 2)
        throw Error(ErrorKind::InvalidArgument, "lipschitz_experiment needs trials >= 2");
    StabilityReport report;
    report.M = M;
    report.trials = trials;
    const auto& spaces = model.spaces();
    const int segments = std::max(options.segment_samples, 2);

    auto update = [](std::optional<double>& slot, double v) { slot = slot ? std::max(*slot, v) : v; };

    for (int t = 0; t < trials; ++t) {
        const auto tt = static_cast<std::uint64_t>(t);
        const auto mu = sample_marginals_in_band(spaces, M, options.mass, derive_seed(seed, tt, 0));
        const auto nu = sample_marginals_in_band(spaces, M, options.mass, derive_seed(seed, tt, 1));
        const auto smu = solve(model, mu, options.solver);
        const auto snu = solve(model, nu, options.solver);
        if (!smu.report.converged || !snu.report.converged) {
            ++report.failures;
            continue;
        }
        report.max_potential_sup = std::max({report.max_potential_sup, max_abs(smu.potentials.values),
                                             max_abs(snu.potentials.values)});

        const Family<double> dmu = mu.densities() - nu.densities();
        const double dist_l2 = weighted_norm(spaces, dmu, Norm::L2);
        if (dist_l2 < 1e-12) {
            ++report.skipped;
            continue;
        }
        const double dist_linf = weighted_norm(spaces, dmu, Norm::LInf);
        const Family<double> dphi = smu.potentials.values - snu.potentials.values;

        PairRecord rec;
        rec.trial = static_cast<std::size_t>(t);
        rec.distance_l2 = dist_l2;
        rec.ratio_l2 = weighted_norm(spaces, dphi, Norm::L2) / dist_l2;
        rec.ratio_linf = weighted_norm(spaces, dphi, Norm::LInf) / dist_linf;

        bool segment_ok = true;
        Family<double> warm = smu.potentials.values;
        for (int k = 0; k < segments && segment_ok; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(segments - 1);
            Family<double> point = mu.densities() + s * (nu.densities() - mu.densities());
            const MarginalFamily<double> rho(spaces, std::move(point));
            const auto sol = k == segments - 1 ? snu : solve(model, rho, options.solver, warm);
            if (!sol.report.converged) {
                segment_ok = false;
                break;
            }
            warm = sol.potentials.values;
            const double norm = restricted_inverse_norm(model, sol.potentials.values, options.solver.dense_cap);
            rec.segment_max_op_norm = std::max(rec.segment_max_op_norm, norm);
        }
        if (!segment_ok) {
            ++report.failures;
            continue;
        }
        update(report.max_ratio_l2, rec.ratio_l2);
        update(report.max_ratio_linf, rec.ratio_linf);
        update(report.max_op_norm_l2, rec.segment_max_op_norm);
        report.pairs.push_back(rec);
    }
    if (report.failures == trials)
        throw Error(ErrorKind::AllTrialsFailed, "no pair of solves succeeded");
    return report;
}

double apriori_bound_scan(const KernelModel<double>& model, double M, int trials, std::uint64_t seed,
                          const StabilityOptions& options) {
    if (!(M >= 1.0))
        throw Error(ErrorKind::BandInfeasible, "band parameter M must be >= 1");
    auto feasible = [&](double b) { return options.mass >= 1.0 / b && options.mass <= b; };
    if (!feasible(M))
        throw Error(ErrorKind::BandInfeasible, "mass outside [1/M, M]");
    std::vector<double> bands;
    for (double b = M; b > 1.0 && feasible(b); b /= 2.0)
        bands.push_back(b);
    if (feasible(1.0))
        bands.push_back(1.0);

    double bound = 0.0;
    for (double band : bands) {
        for (int t = 0; t < trials; ++t) {
            const auto mu = sample_marginals_in_band(model.spaces(), band, options.mass,
                                                     derive_seed(seed, static_cast<std::uint64_t>(t), band_tag(band)));
            const auto sol = solve(model, mu, options.solver);
            if (!sol.report.converged)
                throw Error(ErrorKind::NotConverged, "solve failed in a-priori bound scan");
            bound = std::max(bound, max_abs(sol.potentials.values));
        }
    }
    return bound;
}

} // namespace mms
