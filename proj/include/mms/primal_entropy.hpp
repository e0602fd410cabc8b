#pragma once

#include "mms/schroedinger_map.hpp"

#include <cmath>

namespace mms {

/// q = gamma m on the product space, gamma stored as its logarithm.
template <typename Scalar>
struct Coupling {
    Shape shape;
    VectorX<Scalar> log_density;
    Scalar mass{};
};

template <typename Scalar>
Scalar coupling_mass(const Shape& shape, const VectorX<Scalar>& log_density, const Spaces<Scalar>& spaces) {
    using std::exp;
    return exp(log_total(log_density, shape, log_weights_of(spaces)));
}

/// gamma = K e^{sum_j phi_j(x_j)}.
template <typename Scalar>
Coupling<Scalar> coupling_from_potentials(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    model.check_family(phi);
    Coupling<Scalar> c{model.shape(), add_separable(model.kernel().log_values(), model.shape(), phi), Scalar(0)};
    c.mass = std::exp(log_total_mass(model, phi));
    return c;
}

template <typename Scalar>
Family<Scalar> marginals_of(const Coupling<Scalar>& coupling, const Spaces<Scalar>& spaces) {
    if (shape_of(spaces) != coupling.shape)
        throw Error(ErrorKind::ShapeMismatch, "coupling shape does not match spaces");
    const auto off = log_weights_of(spaces);
    Family<Scalar> out(spaces.size());
    for (std::size_t i = 0; i < spaces.size(); ++i)
        out[i] = log_marginal(coupling.log_density, coupling.shape, static_cast<Index>(i), off).array().exp().matrix();
    return out;
}

/// H(q | K m) = int (log(gamma / K) - 1) dq, including the "-1" term
/// (equals the usual relative entropy minus the coupling mass).
template <typename Scalar>
Scalar relative_entropy(const Coupling<Scalar>& coupling, const KernelTensor<Scalar>& kernel,
                        const Spaces<Scalar>& spaces) {
    using std::exp;
    if (kernel.shape() != coupling.shape || shape_of(spaces) != coupling.shape)
        throw Error(ErrorKind::ShapeMismatch, "coupling, kernel and spaces disagree");
    const VectorX<Scalar> log_q = add_separable(coupling.log_density, coupling.shape, log_weights_of(spaces));
    const Scalar shift = log_q.maxCoeff();
    VectorX<Scalar> terms(log_q.size());
    for (Index k = 0; k < terms.size(); ++k)
        terms[k] = exp(log_q[k] - shift) * (coupling.log_density[k] - kernel.log_values()[k] - Scalar(1));
    return exp(shift) * pairwise_sum(terms);
}

template <typename Scalar>
Scalar duality_gap(const KernelModel<Scalar>& model, const Family<Scalar>& phi, const Family<Scalar>& mu) {
    const auto q = coupling_from_potentials(model, phi);
    return relative_entropy(q, model.kernel(), model.spaces()) - dual_objective(model, phi, mu);
}

/// Independent coupling prod_i mu_i / s^{N-1}; its marginals are mu exactly.
template <typename Scalar>
Coupling<Scalar> product_feasible_coupling(const MarginalFamily<Scalar>& mu, const Spaces<Scalar>& spaces) {
    using std::log;
    MarginalFamily<Scalar> checked(spaces, mu.densities());
    const Shape shape = shape_of(spaces);
    Family<Scalar> log_mu(spaces.size());
    for (std::size_t i = 0; i < spaces.size(); ++i)
        log_mu[i] = checked[i].array().log().matrix();
    const Scalar s = checked.mass();
    VectorX<Scalar> base = VectorX<Scalar>::Constant(shape_product(shape),
                                                     -Scalar(static_cast<double>(spaces.size() - 1)) * log(s));
    return Coupling<Scalar>{shape, add_separable(base, shape, log_mu), s};
}

} // namespace mms
