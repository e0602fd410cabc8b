#pragma once

#include "mms/schroedinger_map.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>

namespace mms {

inline constexpr Index kDefaultDenseCap = 4096;

/// Linearization of logT at phi, id + L, with L built from the conditional
/// expectations of Q_phi (density proportional to K e^{sum phi} w.r.t. m).
template <typename Scalar>
class JacobianOperator {
public:
    JacobianOperator(const KernelModel<Scalar>& model, Family<Scalar> phi)
        : spaces_(model.spaces()), shape_(model.shape()), phi_(std::move(phi)) {
        model.check_family(phi_);
        log_gamma_ = add_separable(model.kernel().log_values(), shape_, phi_);
        log_q_ = add_separable(log_gamma_, shape_, model.log_weights());
        logT_.resize(phi_.size());
        for (std::size_t i = 0; i < phi_.size(); ++i)
            logT_[i] = log_marginal(log_gamma_, shape_, static_cast<Index>(i), model.log_weights());
        LogSumExp<Scalar> acc;
        for (Index x = 0; x < logT_[0].size(); ++x)
            acc.add(logT_[0][x] + spaces_[0].log_weights()[x]);
        logZ_ = acc.value();
    }

    const Family<Scalar>& phi() const { return phi_; }
    const Family<Scalar>& logT() const { return logT_; }
    const VectorX<Scalar>& log_gamma() const { return log_gamma_; }
    Scalar logZ() const { return logZ_; }
    const Spaces<Scalar>& spaces() const { return spaces_; }
    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return spaces_.size(); }
    std::vector<Index> sizes() const { return shape_; }
    Index dimension() const { return shape_sum(); }

    void check_family(const Family<Scalar>& f) const {
        if (f.size() != spaces_.size())
            throw Error(ErrorKind::ShapeMismatch, "family has wrong number of components");
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i].size() != spaces_[i].size())
                throw Error(ErrorKind::ShapeMismatch, "family component has wrong length");
    }

    /// Conditional weight Q(x_-i | x_i) of the full index x, for each i.
    /// Calls f(flat, idx, weights) where weights[i] is that conditional.
    template <typename F>
    void for_each_conditional(F&& f) const {
        const std::size_t n = rank();
        VectorX<Scalar> w(static_cast<Index>(n));
        for_each_index(shape_, [&](Index k, const std::vector<Index>& idx) {
            for (std::size_t i = 0; i < n; ++i) {
                const Index xi = idx[i];
                w[static_cast<Index>(i)] =
                    std::exp(log_q_[k] - logT_[i][xi] - spaces_[i].log_weights()[xi]);
            }
            f(k, idx, w);
        });
    }

private:
    Index shape_sum() const {
        Index s = 0;
        for (Index n : shape_)
            s += n;
        return s;
    }

    Spaces<Scalar> spaces_;
    Shape shape_;
    Family<Scalar> phi_;
    VectorX<Scalar> log_gamma_;
    VectorX<Scalar> log_q_; // log_gamma + sum_j log m_j
    Family<Scalar> logT_;
    Scalar logZ_{};
};

template <typename Scalar>
JacobianOperator<Scalar> build_jacobian(const KernelModel<Scalar>& model, const Family<Scalar>& phi) {
    return JacobianOperator<Scalar>(model, phi);
}

/// (Lh)_i(x_i) = E_Q[ sum_{j != i} h_j(x_j) | x_i ], one pass over the tensor.
template <typename Scalar>
Family<Scalar> apply_L(const JacobianOperator<Scalar>& J, const Family<Scalar>& h) {
    J.check_family(h);
    const std::size_t n = J.rank();
    Family<Scalar> out = zero_family<Scalar>(J.sizes());
    J.for_each_conditional([&](Index, const std::vector<Index>& idx, const VectorX<Scalar>& w) {
        Scalar total(0);
        for (std::size_t j = 0; j < n; ++j)
            total += h[j][idx[j]];
        for (std::size_t i = 0; i < n; ++i)
            out[i][idx[i]] += w[static_cast<Index>(i)] * (total - h[i][idx[i]]);
    });
    return out;
}

template <typename Scalar>
Family<Scalar> apply_Ttilde_prime(const JacobianOperator<Scalar>& J, const Family<Scalar>& h) {
    return h + apply_L(J, h);
}

template <typename Scalar>
Family<Scalar> apply_T_prime(const JacobianOperator<Scalar>& J, const Family<Scalar>& h) {
    Family<Scalar> out = apply_Ttilde_prime(J, h);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].array() *= J.logT()[i].array().exp();
    return out;
}

inline void check_dense_cap(Index rows, Index cap) {
    if (rows > cap)
        throw Error(ErrorKind::SizeCapExceeded,
                    "dense size " + std::to_string(rows) + " exceeds cap " + std::to_string(cap));
}

template <typename Scalar>
std::vector<Index> block_offsets(const std::vector<Index>& sizes) {
    std::vector<Index> off(sizes.size() + 1, 0);
    for (std::size_t i = 0; i < sizes.size(); ++i)
        off[i + 1] = off[i] + sizes[i];
    return off;
}

/// Dense id + L: identity diagonal blocks, block (i, j) holds Q(x_j | x_i).
template <typename Scalar>
MatrixX<Scalar> assemble_dense(const JacobianOperator<Scalar>& J, Index cap = kDefaultDenseCap) {
    const Index dim = J.dimension();
    check_dense_cap(dim, cap);
    const std::size_t n = J.rank();
    const auto off = block_offsets<Scalar>(J.sizes());
    MatrixX<Scalar> A = MatrixX<Scalar>::Identity(dim, dim);
    J.for_each_conditional([&](Index, const std::vector<Index>& idx, const VectorX<Scalar>& w) {
        for (std::size_t i = 0; i < n; ++i) {
            const Index row = off[i] + idx[i];
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    A(row, off[j] + idx[j]) += w[static_cast<Index>(i)];
        }
    });
    return A;
}

/// Rows enforcing int h_i dm_i = 0 for i < N.
template <typename Scalar>
MatrixX<Scalar> gauge_rows(const Spaces<Scalar>& spaces) {
    std::vector<Index> sizes;
    for (const auto& s : spaces)
        sizes.push_back(s.size());
    const auto off = block_offsets<Scalar>(sizes);
    const Index n = static_cast<Index>(spaces.size());
    MatrixX<Scalar> G = MatrixX<Scalar>::Zero(n - 1, off.back());
    for (Index i = 0; i + 1 < n; ++i)
        G.row(i).segment(off[i], sizes[i]) = spaces[i].weights().transpose();
    return G;
}

/// Unequal-mass spread of theta relative to its absolute mass scale.
template <typename Scalar>
Scalar mass_spread(const Spaces<Scalar>& spaces, const Family<Scalar>& theta, Scalar* scale = nullptr) {
    using std::abs;
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -lo;
    Scalar s(0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const Scalar m = weighted_mass(spaces[i], theta[i]);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
        s = std::max(s, weighted_mass(spaces[i], VectorX<Scalar>(theta[i].cwiseAbs())));
    }
    if (scale)
        *scale = s;
    return hi - lo;
}

/// Shift each component by a constant so all weighted masses equal their mean.
template <typename Scalar>
Family<Scalar> project_to_F(const Spaces<Scalar>& spaces, Family<Scalar> theta) {
    Scalar mean(0);
    std::vector<Scalar> masses(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        masses[i] = weighted_mass(spaces[i], theta[i]);
        mean += masses[i];
    }
    mean /= Scalar(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i].array() += mean - masses[i];
    return theta;
}

/// Solve T'(phi) h = theta for h in E. theta must lie in F.
template <typename Scalar>
PotentialFamily<Scalar> solve_in_E(const JacobianOperator<Scalar>& J, const Family<Scalar>& theta,
                                   Index cap = kDefaultDenseCap) {
    J.check_family(theta);
    Scalar scale(0);
    const Scalar spread = mass_spread(J.spaces(), theta, &scale);
    if (spread > Scalar(1e-8) * scale)
        throw Error(ErrorKind::NotInRange, "right-hand side does not have equal masses");

    Family<Scalar> scaled(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        scaled[i] = theta[i].cwiseProduct(VectorX<Scalar>((-J.logT()[i]).array().exp()));
    const VectorX<Scalar> rhs_top = stack(scaled);

    const MatrixX<Scalar> A = assemble_dense(J, cap);
    const MatrixX<Scalar> G = gauge_rows(J.spaces());
    const Index dim = A.rows();
    MatrixX<Scalar> stacked(dim + G.rows(), dim);
    stacked << A, G;
    VectorX<Scalar> rhs = VectorX<Scalar>::Zero(stacked.rows());
    rhs.head(dim) = rhs_top;

    const VectorX<Scalar> h = stacked.colPivHouseholderQr().solve(rhs);
    const Scalar rhs_inf = rhs_top.size() ? rhs_top.cwiseAbs().maxCoeff() : Scalar(0);
    const Scalar res_inf = (A * h - rhs_top).cwiseAbs().maxCoeff();
    if (res_inf > Scalar(1e-8) * rhs_inf)
        throw Error(ErrorKind::NotInRange, "restricted system is inconsistent");
    return gauge_project_E(J.spaces(), unstack<Scalar>(h, J.sizes()));
}

/// Diagonal of the weighted-L2 similarity: sqrt(m_i(x)) stacked.
template <typename Scalar>
VectorX<Scalar> sqrt_weights(const Spaces<Scalar>& spaces) {
    Family<Scalar> w;
    for (const auto& s : spaces)
        w.push_back(s.weights().cwiseSqrt());
    return stack(w);
}

/// Orthonormal basis (similarity coordinates) of the blockwise constants
/// whose block values sum to zero.
template <typename Scalar>
MatrixX<Scalar> analytic_kernel_basis(const Spaces<Scalar>& spaces) {
    std::vector<Index> sizes;
    for (const auto& s : spaces)
        sizes.push_back(s.size());
    const auto off = block_offsets<Scalar>(sizes);
    const Index n = static_cast<Index>(spaces.size());
    const VectorX<Scalar> sw = sqrt_weights(spaces);
    MatrixX<Scalar> B = MatrixX<Scalar>::Zero(off.back(), n - 1);
    for (Index k = 0; k + 1 < n; ++k) {
        B.col(k).segment(off[k], sizes[k]) = sw.segment(off[k], sizes[k]);
        B.col(k).segment(off[n - 1], sizes[n - 1]) = -sw.segment(off[n - 1], sizes[n - 1]);
    }
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(B);
    return qr.householderQ() * MatrixX<Scalar>::Identity(B.rows(), B.cols());
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal column bases. Returns 1 when dimensions differ.
template <typename Scalar>
Scalar subspace_angle(const MatrixX<Scalar>& U, const MatrixX<Scalar>& V) {
    if (U.cols() != V.cols() || U.rows() != V.rows())
        return Scalar(1);
    if (U.cols() == 0)
        return Scalar(0);
    const MatrixX<Scalar> residual = U - V * (V.transpose() * U);
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(residual);
    return svd.singularValues()[0];
}

template <typename Scalar>
struct KernelSpectrum {
    VectorX<Scalar> singular_values; // descending, weighted-L2 geometry
    MatrixX<Scalar> kernel_basis;    // columns, original coordinates, m-orthonormal
    Index kernel_dim = 0;
    Scalar smallest_nonzero{};
    Scalar kernel_angle{}; // sin of largest angle to the analytic kernel
};

template <typename Scalar>
KernelSpectrum<Scalar> kernel_spectrum(const JacobianOperator<Scalar>& J, Index cap = kDefaultDenseCap) {
    const MatrixX<Scalar> A = assemble_dense(J, cap);
    const VectorX<Scalar> sw = sqrt_weights(J.spaces());
    const MatrixX<Scalar> S = sw.asDiagonal() * A * sw.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<MatrixX<Scalar>> svd(S, Eigen::ComputeFullV);
    KernelSpectrum<Scalar> out;
    out.singular_values = svd.singularValues();
    const Scalar smax = out.singular_values[0];
    const Index dim = out.singular_values.size();
    Index rank = 0;
    while (rank < dim && out.singular_values[rank] > Scalar(1e-8) * smax)
        ++rank;
    out.kernel_dim = dim - rank;
    out.smallest_nonzero = rank > 0 ? out.singular_values[rank - 1] : Scalar(0);
    const MatrixX<Scalar> V0 = svd.matrixV().rightCols(out.kernel_dim);
    out.kernel_basis = sw.cwiseInverse().asDiagonal() * V0;
    out.kernel_angle = subspace_angle<Scalar>(V0, analytic_kernel_basis(J.spaces()));
    return out;
}

/// Violation of the F_phi condition: max |I_i - I_j| / max(1, |I_1|),
/// I_i = int e^{logT_i} theta_i dm_i.
template <typename Scalar>
Scalar range_check(const JacobianOperator<Scalar>& J, const Family<Scalar>& theta) {
    using std::abs;
    J.check_family(theta);
    VectorX<Scalar> I(static_cast<Index>(theta.size()));
    for (std::size_t i = 0; i < theta.size(); ++i)
        I[static_cast<Index>(i)] = weighted_mass(
            J.spaces()[i], VectorX<Scalar>(J.logT()[i].array().exp() * theta[i].array()));
    return (I.maxCoeff() - I.minCoeff()) / std::max(Scalar(1), abs(I[0]));
}

} // namespace mms
