#pragma once

#include "mms/core.hpp"
#include "mms/tensor.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace mms {

/// One finite marginal space: n atoms with strictly positive probability weights.
template <typename Scalar>
class DiscreteSpace {
public:
    explicit DiscreteSpace(VectorX<Scalar> weights) : weights_(std::move(weights)) {
        using std::abs;
        if (weights_.size() == 0)
            throw Error(ErrorKind::ShapeMismatch, "space must have at least one atom");
        if (!weights_.allFinite())
            throw Error(ErrorKind::NonFinite, "space weights must be finite");
        if ((weights_.array() <= Scalar(0)).any())
            throw Error(ErrorKind::NonPositiveEntry, "space weights must be > 0");
        if (abs(pairwise_sum(weights_) - Scalar(1)) > Scalar(1e-12))
            throw Error(ErrorKind::InvalidArgument, "space weights must sum to 1");
        log_weights_ = weights_.array().log().matrix();
    }

    static DiscreteSpace uniform(Index n) {
        return DiscreteSpace(VectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
    }

    Index size() const { return weights_.size(); }
    const VectorX<Scalar>& weights() const { return weights_; }
    const VectorX<Scalar>& log_weights() const { return log_weights_; }

    friend bool operator==(const DiscreteSpace& a, const DiscreteSpace& b) {
        return a.weights_ == b.weights_;
    }

private:
    VectorX<Scalar> weights_;
    VectorX<Scalar> log_weights_;
};

template <typename Scalar>
using Spaces = std::vector<DiscreteSpace<Scalar>>;

template <typename Scalar>
Shape shape_of(const Spaces<Scalar>& spaces) {
    Shape s;
    s.reserve(spaces.size());
    for (const auto& sp : spaces)
        s.push_back(sp.size());
    return s;
}

template <typename Scalar>
Family<Scalar> log_weights_of(const Spaces<Scalar>& spaces) {
    Family<Scalar> out;
    out.reserve(spaces.size());
    for (const auto& sp : spaces)
        out.push_back(sp.log_weights());
    return out;
}

/// Strictly positive density on the product space, row-major over (x_1, ..., x_N).
/// The logarithm is the primary representation; linear values are derived on demand.
template <typename Scalar>
class KernelTensor {
public:
    static KernelTensor from_values(Shape shape, const VectorX<Scalar>& values) {
        check_length(shape, values.size());
        if (!values.allFinite())
            throw Error(ErrorKind::NonFinite, "kernel values must be finite");
        if ((values.array() <= Scalar(0)).any())
            throw Error(ErrorKind::NonPositiveEntry, "kernel values must be > 0");
        return KernelTensor(std::move(shape), values.array().log().matrix());
    }

    static KernelTensor from_log(Shape shape, VectorX<Scalar> log_values) {
        check_length(shape, log_values.size());
        if (!log_values.allFinite())
            throw Error(ErrorKind::NonFinite, "kernel log-values must be finite");
        return KernelTensor(std::move(shape), std::move(log_values));
    }

    const Shape& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return log_values_.size(); }
    const VectorX<Scalar>& log_values() const { return log_values_; }

    /// Linear-domain materialization; entries that flush to 0 or overflow are errors.
    VectorX<Scalar> values() const {
        // Scalar exp: Eigen's packet exp clamps its argument and never flushes to 0.
        VectorX<Scalar> v = log_values_.unaryExpr([](Scalar x) { using std::exp; return exp(x); });
        if (!v.allFinite())
            throw Error(ErrorKind::NonFinite, "kernel overflows in linear domain");
        if ((v.array() <= Scalar(0)).any())
            throw Error(ErrorKind::NonPositiveEntry, "kernel underflows to 0 in linear domain");
        return v;
    }

private:
    KernelTensor(Shape shape, VectorX<Scalar> log_values)
        : shape_(std::move(shape)), log_values_(std::move(log_values)) {}

    static void check_length(const Shape& shape, Index length) {
        if (shape.empty())
            throw Error(ErrorKind::ShapeMismatch, "kernel shape is empty");
        for (Index n : shape)
            if (n <= 0)
                throw Error(ErrorKind::ShapeMismatch, "kernel dimensions must be positive");
        if (shape_product(shape) != length) {
            std::ostringstream os;
            os << "kernel has " << length << " entries, shape requires " << shape_product(shape);
            throw Error(ErrorKind::ShapeMismatch, os.str());
        }
    }

    Shape shape_;
    VectorX<Scalar> log_values_;
};

template <typename Scalar>
Scalar weighted_mass(const DiscreteSpace<Scalar>& space, const VectorX<Scalar>& f) {
    if (f.size() != space.size())
        throw Error(ErrorKind::LengthMismatch, "density length does not match space");
    return pairwise_sum(space.weights().cwiseProduct(f));
}

/// Balanced positive marginal densities mu_i (w.r.t. m_i) with common mass s.
template <typename Scalar>
class MarginalFamily {
public:
    static constexpr double kMassTolerance = 1e-10;

    MarginalFamily(const Spaces<Scalar>& spaces, Family<Scalar> densities)
        : densities_(std::move(densities)) {
        using std::abs;
        if (densities_.size() != spaces.size() || densities_.size() < 2)
            throw Error(ErrorKind::ShapeMismatch, "need one density per space (N >= 2)");
        for (std::size_t i = 0; i < spaces.size(); ++i) {
            if (densities_[i].size() != spaces[i].size())
                throw Error(ErrorKind::ShapeMismatch, "density length does not match space size");
            if (!densities_[i].allFinite())
                throw Error(ErrorKind::NonFinite, "densities must be finite");
            if ((densities_[i].array() <= Scalar(0)).any())
                throw Error(ErrorKind::NonPositiveEntry, "densities must be > 0");
        }
        masses_.resize(static_cast<Index>(spaces.size()));
        for (std::size_t i = 0; i < spaces.size(); ++i)
            masses_[static_cast<Index>(i)] = weighted_mass(spaces[i], densities_[i]);
        mass_ = masses_.mean();
        const Scalar spread = masses_.maxCoeff() - masses_.minCoeff();
        if (spread > Scalar(kMassTolerance) * abs(mass_)) {
            std::ostringstream os;
            os << "marginal masses differ (spread " << spread << ", mass " << mass_ << ")";
            throw Error(ErrorKind::MassImbalance, os.str());
        }
    }

    const Family<Scalar>& densities() const { return densities_; }
    const VectorX<Scalar>& operator[](std::size_t i) const { return densities_[i]; }
    std::size_t size() const { return densities_.size(); }
    Scalar mass() const { return mass_; }
    const VectorX<Scalar>& component_masses() const { return masses_; }

private:
    Family<Scalar> densities_;
    VectorX<Scalar> masses_;
    Scalar mass_{};
};

/// Cost tensor and temperature for K = exp(-c / epsilon).
template <typename Scalar>
struct GibbsSpec {
    Shape shape;
    VectorX<Scalar> cost;
    Scalar epsilon;
};

/// Spaces plus kernel: everything the forward map T needs.
template <typename Scalar>
class KernelModel {
public:
    KernelModel(Spaces<Scalar> spaces, KernelTensor<Scalar> kernel)
        : spaces_(std::move(spaces)), kernel_(std::move(kernel)) {
        if (spaces_.size() < 2)
            throw Error(ErrorKind::ShapeMismatch, "need N >= 2 spaces");
        if (shape_of(spaces_) != kernel_.shape())
            throw Error(ErrorKind::ShapeMismatch, "kernel shape does not match space sizes");
        log_weights_ = log_weights_of(spaces_);
    }

    const Spaces<Scalar>& spaces() const { return spaces_; }
    const DiscreteSpace<Scalar>& space(std::size_t i) const { return spaces_[i]; }
    const KernelTensor<Scalar>& kernel() const { return kernel_; }
    const Shape& shape() const { return kernel_.shape(); }
    std::size_t rank() const { return spaces_.size(); }
    const Family<Scalar>& log_weights() const { return log_weights_; }

    std::vector<Index> sizes() const { return shape(); }

    void check_family(const Family<Scalar>& f) const {
        if (f.size() != spaces_.size())
            throw Error(ErrorKind::ShapeMismatch, "family has wrong number of components");
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i].size() != spaces_[i].size())
                throw Error(ErrorKind::ShapeMismatch, "family component has wrong length");
    }

private:
    Spaces<Scalar> spaces_;
    KernelTensor<Scalar> kernel_;
    Family<Scalar> log_weights_;
};

template <typename Scalar>
struct ValidatedProblem {
    KernelModel<Scalar> model;
    MarginalFamily<Scalar> target;

    Scalar mass() const { return target.mass(); }
};

/// Cross-checks shapes of already-constructed parts and bundles them.
template <typename Scalar>
ValidatedProblem<Scalar> validate_problem(Spaces<Scalar> spaces, KernelTensor<Scalar> kernel,
                                          const MarginalFamily<Scalar>& target) {
    KernelModel<Scalar> model(std::move(spaces), std::move(kernel));
    // Re-run the marginal invariants against these spaces.
    MarginalFamily<Scalar> checked(model.spaces(), target.densities());
    return ValidatedProblem<Scalar>{std::move(model), std::move(checked)};
}

/// Validation from raw data (weights, kernel values, densities).
template <typename Scalar>
ValidatedProblem<Scalar> validate_problem(const Family<Scalar>& weights, Shape kernel_shape,
                                          const VectorX<Scalar>& kernel_values,
                                          const Family<Scalar>& densities) {
    Spaces<Scalar> spaces;
    for (const auto& w : weights)
        spaces.emplace_back(w);
    auto kernel = KernelTensor<Scalar>::from_values(std::move(kernel_shape), kernel_values);
    KernelModel<Scalar> model(std::move(spaces), std::move(kernel));
    MarginalFamily<Scalar> target(model.spaces(), densities);
    return ValidatedProblem<Scalar>{std::move(model), std::move(target)};
}

enum class Norm { L2, LInf };

template <typename Scalar>
Scalar weighted_norm(const DiscreteSpace<Scalar>& space, const VectorX<Scalar>& f, Norm p) {
    using std::sqrt;
    if (f.size() != space.size())
        throw Error(ErrorKind::LengthMismatch, "function length does not match space");
    if (p == Norm::LInf)
        return f.size() ? f.cwiseAbs().maxCoeff() : Scalar(0);
    return sqrt(pairwise_sum(space.weights().cwiseProduct(f.cwiseAbs2())));
}

/// Family norm: L2 sums squared component norms, LInf takes the max.
template <typename Scalar>
Scalar weighted_norm(const Spaces<Scalar>& spaces, const Family<Scalar>& f, Norm p) {
    using std::sqrt;
    if (f.size() != spaces.size())
        throw Error(ErrorKind::LengthMismatch, "family size does not match spaces");
    Scalar acc(0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Scalar ni = weighted_norm(spaces[i], f[i], p);
        acc = p == Norm::LInf ? std::max(acc, ni) : acc + ni * ni;
    }
    return p == Norm::LInf ? acc : sqrt(acc);
}

template <typename Scalar>
KernelTensor<Scalar> build_gibbs_kernel(const GibbsSpec<Scalar>& spec) {
    if (!(spec.epsilon > Scalar(0)))
        throw Error(ErrorKind::InvalidArgument, "epsilon must be > 0");
    if (!spec.cost.allFinite())
        throw Error(ErrorKind::NonFinite, "cost entries must be finite");
    return KernelTensor<Scalar>::from_log(spec.shape, (-spec.cost / spec.epsilon).eval());
}

} // namespace mms
