#pragma once

#include "mms/problem.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace mms {

enum class Gauge { MeanZero, UnitExp, Free };

template <typename Scalar>
struct PotentialFamily {
    Family<Scalar> values;
    Gauge gauge = Gauge::Free;
    /// Constants added by the last gauge change; sums to zero.
    std::optional<VectorX<Scalar>> shifts;

    const VectorX<Scalar>& operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

template <typename Scalar>
Family<Scalar> zero_family(const std::vector<Index>& sizes) {
    Family<Scalar> f;
    for (Index n : sizes)
        f.push_back(VectorX<Scalar>::Zero(n));
    return f;
}

/// Offsets phi_j + log m_j used by every contraction over x_{-i}.
template <typename Scalar>
Family<Scalar> weighted_offsets(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    Family<Scalar> off(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j)
        off[j] = phi[j] + model.log_weights()[j];
    return off;
}

/// logT_i(phi)(x_i) = phi_i(x_i) + log sum_{x_-i} K e^{sum_{j!=i} phi_j} m_-i.
template <typename Scalar>
VectorX<Scalar> apply_logT_component(const KernelModel<Scalar>& model, const Family<Scalar>& phi,
                                     std::size_t i) {
    model.check_family(phi);
    const auto off = weighted_offsets(model, phi);
    return phi[i] + log_marginal(model.kernel().log_values(), model.shape(), static_cast<Index>(i), off);
}

template <typename Scalar>
Family<Scalar> apply_logT(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    model.check_family(phi);
    const auto off = weighted_offsets(model, phi);
    Family<Scalar> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i)
        out[i] = phi[i] + log_marginal(model.kernel().log_values(), model.shape(), static_cast<Index>(i), off);
    return out;
}

template <typename Scalar>
Family<Scalar> exp_family(const Family<Scalar>& log_f) {
    const Scalar limit = std::log(std::numeric_limits<Scalar>::max());
    Family<Scalar> out(log_f.size());
    for (std::size_t i = 0; i < log_f.size(); ++i) {
        if (log_f[i].size() && log_f[i].maxCoeff() >= limit)
            throw Error(ErrorKind::Overflow, "T(phi) exceeds the representable range");
        out[i] = log_f[i].array().exp().matrix();
    }
    return out;
}

template <typename Scalar>
Family<Scalar> apply_T(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    return exp_family(apply_logT(model, phi));
}

template <typename Scalar>
struct Residual {
    Family<Scalar> r;
    Scalar norm2;
    Scalar norm_inf;
};

template <typename Scalar>
Residual<Scalar> residual(const KernelModel<Scalar>& model, const Family<Scalar>& phi,
                          const Family<Scalar>& mu) {
    model.check_family(mu);
    Family<Scalar> r = apply_T(model, phi) - mu;
    const Scalar n2 = weighted_norm(model.spaces(), r, Norm::L2);
    const Scalar ninf = weighted_norm(model.spaces(), r, Norm::LInf);
    return {std::move(r), n2, ninf};
}

/// log of the total mass  int K e^{sum phi} dm.
template <typename Scalar>
Scalar log_total_mass(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    model.check_family(phi);
    return log_total(model.kernel().log_values(), model.shape(), weighted_offsets(model, phi));
}

/// sum_i int phi_i mu_i dm_i - int K e^{sum phi} dm.
template <typename Scalar>
Scalar dual_objective(const KernelModel<Scalar>& model, const Family<Scalar>& phi,
                      const Family<Scalar>& mu) {
    using std::exp;
    model.check_family(mu);
    Scalar linear(0);
    for (std::size_t i = 0; i < phi.size(); ++i)
        linear += pairwise_sum(model.space(i).weights().cwiseProduct(phi[i]).cwiseProduct(mu[i]));
    return linear - exp(log_total_mass(model, phi));
}

/// Shift phi_1..phi_{N-1} to mean zero and absorb the total into phi_N.
template <typename Scalar>
PotentialFamily<Scalar> gauge_project_E(const Spaces<Scalar>& spaces, const Family<Scalar>& phi) {
    const std::size_t n = phi.size();
    if (n != spaces.size())
        throw Error(ErrorKind::ShapeMismatch, "family size does not match spaces");
    VectorX<Scalar> shifts = VectorX<Scalar>::Zero(static_cast<Index>(n));
    PotentialFamily<Scalar> out{phi, Gauge::MeanZero, std::nullopt};
    Scalar absorbed(0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Scalar c = weighted_mass(spaces[i], phi[i]);
        out.values[i].array() -= c;
        shifts[static_cast<Index>(i)] = -c;
        absorbed += c;
    }
    out.values[n - 1].array() += absorbed;
    shifts[static_cast<Index>(n - 1)] = absorbed;
    out.shifts = shifts;
    return out;
}

/// Shift phi_1..phi_{N-1} so that int e^{psi_i} dm_i = 1, absorbing into phi_N.
template <typename Scalar>
PotentialFamily<Scalar> gauge_to_unit_exp(const Spaces<Scalar>& spaces, const Family<Scalar>& phi) {
    const std::size_t n = phi.size();
    if (n != spaces.size())
        throw Error(ErrorKind::ShapeMismatch, "family size does not match spaces");
    VectorX<Scalar> shifts = VectorX<Scalar>::Zero(static_cast<Index>(n));
    PotentialFamily<Scalar> out{phi, Gauge::UnitExp, std::nullopt};
    Scalar absorbed(0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        LogSumExp<Scalar> acc;
        for (Index x = 0; x < phi[i].size(); ++x)
            acc.add(phi[i][x] + spaces[i].log_weights()[x]);
        const Scalar lambda = -acc.value();
        out.values[i].array() += lambda;
        shifts[static_cast<Index>(i)] = lambda;
        absorbed -= lambda;
    }
    out.values[n - 1].array() += absorbed;
    shifts[static_cast<Index>(n - 1)] = absorbed;
    out.shifts = shifts;
    return out;
}

/// Largest |int phi_i dm_i| over i < N (zero for an exact MeanZero family).
template <typename Scalar>
Scalar mean_zero_violation(const Spaces<Scalar>& spaces, const Family<Scalar>& phi) {
    using std::abs;
    Scalar v(0);
    for (std::size_t i = 0; i + 1 < phi.size(); ++i)
        v = std::max(v, abs(weighted_mass(spaces[i], phi[i])));
    return v;
}

template <typename Scalar>
Scalar unit_exp_violation(const Spaces<Scalar>& spaces, const Family<Scalar>& phi) {
    using std::abs;
    Scalar v(0);
    for (std::size_t i = 0; i + 1 < phi.size(); ++i)
        v = std::max(v, abs(weighted_mass(spaces[i], VectorX<Scalar>(phi[i].array().exp())) - Scalar(1)));
    return v;
}

} // namespace mms
