#pragma once

#include "mms/solvers.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cstdint>
#include <optional>

namespace mms {

/// Orthonormal basis of the orthogonal complement of span(C) (columns of C
/// assumed linearly independent).
template <typename Scalar>
MatrixX<Scalar> orthogonal_complement(const MatrixX<Scalar>& C) {
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(C);
    const MatrixX<Scalar> Q = qr.householderQ();
    return Q.rightCols(C.rows() - C.cols());
}

/// Operator norm in weighted L2 of [T'(phi)]^{-1} : F -> E, i.e. of S'(T(phi)).
/// Gauge-independent: T'(phi) depends on phi only through its orbit.
template <typename Scalar>
Scalar restricted_inverse_norm(const KernelModel<Scalar>& model, const Family<Scalar>& phi,
                               Index cap = kDefaultDenseCap) {
    const auto J = build_jacobian(model, phi);
    const MatrixX<Scalar> A = assemble_dense(J, cap);
    const VectorX<Scalar> sw = sqrt_weights(model.spaces());
    Family<Scalar> scale(J.logT().size());
    for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = J.logT()[i].array().exp().matrix();
    const VectorX<Scalar> d = stack(scale);
    const MatrixX<Scalar> B = (sw.cwiseProduct(d)).asDiagonal() * A * sw.cwiseInverse().asDiagonal();

    const auto off = block_offsets<Scalar>(model.sizes());
    const Index dim = off.back();
    const Index n = static_cast<Index>(model.rank());
    MatrixX<Scalar> gE = MatrixX<Scalar>::Zero(dim, n - 1);
    MatrixX<Scalar> gF = MatrixX<Scalar>::Zero(dim, n - 1);
    for (Index i = 0; i + 1 < n; ++i) {
        gE.col(i).segment(off[i], off[i + 1] - off[i]) = sw.segment(off[i], off[i + 1] - off[i]);
        gF.col(i) = gE.col(i);
        gF.col(i).segment(off[n - 1], dim - off[n - 1]) = -sw.segment(off[n - 1], dim - off[n - 1]);
    }
    const MatrixX<Scalar> PE = orthogonal_complement(gE);
    const MatrixX<Scalar> PF = orthogonal_complement(gF);
    const MatrixX<Scalar> R = PF.transpose() * B * PE;
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(R);
    const Scalar smin = svd.singularValues()[svd.singularValues().size() - 1];
    return Scalar(1) / smin;
}

struct StabilityOptions {
    double mass = 1.0;
    int segment_samples = 11;
    SolverConfig<double> solver{};
};

struct PairRecord {
    std::size_t trial = 0;
    double distance_l2 = 0;
    double ratio_l2 = 0;
    double ratio_linf = 0;
    double segment_max_op_norm = 0;
};

struct StabilityReport {
    double M = 1;
    int trials = 0;
    double max_potential_sup = 0;
    std::optional<double> max_ratio_l2;
    std::optional<double> max_ratio_linf;
    std::optional<double> max_op_norm_l2;
    int failures = 0;
    int skipped = 0;
    std::vector<PairRecord> pairs;
};

/// Deterministic child seed for (base, trial, stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial, std::uint64_t stream);

/// Balanced densities with every entry in [1/M, M] and common mass `mass`.
MarginalFamily<double> sample_marginals_in_band(const Spaces<double>& spaces, double M, double mass,
                                                std::uint64_t seed);

/// ||S'(mu)|| in weighted L2; solves mu first.
double schroedinger_prime_norm(const KernelModel<double>& model, const MarginalFamily<double>& mu,
                               const SolverConfig<double>& config = {},
                               const std::optional<Family<double>>& init = std::nullopt);

StabilityReport lipschitz_experiment(const KernelModel<double>& model, double M, int trials,
                                     std::uint64_t seed, const StabilityOptions& options = {});

/// Max ||S(mu)||_inf over sampled mu. The sample set for band M contains the
/// sample sets of M/2, M/4, ... and of band 1 (when feasible), and trial t
/// always draws from the same stream, so sets are nested in M and in trials.
double apriori_bound_scan(const KernelModel<double>& model, double M, int trials, std::uint64_t seed,
                          const StabilityOptions& options = {});

} // namespace mms
