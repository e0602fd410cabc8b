#pragma once

#include "mms/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <span>

namespace mms {

using Shape = std::vector<Index>;

inline Index shape_product(std::span<const Index> shape) {
    return std::accumulate(shape.begin(), shape.end(), Index(1), std::multiplies<>());
}

/// Visit every multi-index of a row-major tensor in storage order.
/// `f(flat, idx)` receives the flat offset and the current multi-index.
template <typename F>
void for_each_index(std::span<const Index> shape, F&& f) {
    const Index total = shape_product(shape);
    std::vector<Index> idx(shape.size(), 0);
    for (Index k = 0; k < total; ++k) {
        f(k, std::as_const(idx));
        for (Index d = static_cast<Index>(shape.size()) - 1; d >= 0; --d) {
            if (++idx[d] < shape[d])
                break;
            idx[d] = 0;
        }
    }
}

/// Online max-shifted log-sum-exp accumulator.
template <typename Scalar>
struct LogSumExp {
    Scalar max = -std::numeric_limits<Scalar>::infinity();
    Scalar sum = Scalar(0);

    void add(Scalar v) {
        using std::exp;
        if (v > max) {
            sum = sum * exp(max - v) + Scalar(1);
            max = v;
        } else {
            sum += exp(v - max);
        }
    }

    Scalar value() const {
        using std::log;
        if (sum == Scalar(0))
            return -std::numeric_limits<Scalar>::infinity();
        return max + log(sum);
    }
};

/// Pairwise (tree) summation with a fixed leaf size; deterministic for a
/// given input order.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> values) {
    constexpr std::size_t leaf = 32;
    if (values.size() <= leaf) {
        Scalar s(0);
        for (Scalar v : values)
            s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <typename Derived>
typename Derived::Scalar pairwise_sum(const Eigen::DenseBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    VectorX<Scalar> tmp = v;
    return pairwise_sum(std::span<const Scalar>(tmp.data(), static_cast<std::size_t>(tmp.size())));
}

/// Contract one axis of a log-domain tensor:
///   out(outer, inner) = log sum_x exp(a(outer, x, inner) + offset(x)).
/// Returns the reduced tensor and drops `axis` from `shape`.
template <typename Scalar>
VectorX<Scalar> logsumexp_axis(const VectorX<Scalar>& a, Shape& shape, Index axis,
                               const VectorX<Scalar>& offset) {
    const Index n = shape[axis];
    Index outer = 1;
    for (Index d = 0; d < axis; ++d)
        outer *= shape[d];
    Index inner = 1;
    for (Index d = axis + 1; d < static_cast<Index>(shape.size()); ++d)
        inner *= shape[d];

    std::vector<LogSumExp<Scalar>> acc(static_cast<std::size_t>(outer * inner));
    for (Index o = 0; o < outer; ++o) {
        for (Index x = 0; x < n; ++x) {
            const Scalar shift = offset[x];
            const Index base = (o * n + x) * inner;
            for (Index in = 0; in < inner; ++in)
                acc[o * inner + in].add(a[base + in] + shift);
        }
    }
    VectorX<Scalar> out(outer * inner);
    for (Index k = 0; k < out.size(); ++k)
        out[k] = acc[k].value();
    shape.erase(shape.begin() + axis);
    return out;
}

/// Log of the i-th marginal of a log-domain tensor after adding
/// `offsets[j](x_j)` along every other axis j. Axes are folded one at a time,
/// last axis first.
template <typename Scalar>
VectorX<Scalar> log_marginal(const VectorX<Scalar>& log_tensor, const Shape& shape, Index keep,
                             const Family<Scalar>& offsets) {
    VectorX<Scalar> current = log_tensor;
    Shape current_shape = shape;
    for (Index j = static_cast<Index>(shape.size()) - 1; j >= 0; --j) {
        if (j == keep)
            continue;
        // Axes below j are untouched, so j is still at position j.
        current = logsumexp_axis(current, current_shape, j, offsets[j]);
    }
    return current;
}

/// log sum_x exp(log_tensor(x) + sum_j offsets[j](x_j)).
template <typename Scalar>
Scalar log_total(const VectorX<Scalar>& log_tensor, const Shape& shape, const Family<Scalar>& offsets) {
    VectorX<Scalar> m = log_marginal(log_tensor, shape, 0, offsets);
    LogSumExp<Scalar> acc;
    for (Index x = 0; x < m.size(); ++x)
        acc.add(m[x] + offsets[0][x]);
    return acc.value();
}

/// Add sum_j f[j](x_j) to every entry of a row-major tensor.
template <typename Scalar>
VectorX<Scalar> add_separable(const VectorX<Scalar>& tensor, const Shape& shape, const Family<Scalar>& f) {
    VectorX<Scalar> out = tensor;
    for_each_index(shape, [&](Index k, const std::vector<Index>& idx) {
        Scalar s(0);
        for (std::size_t j = 0; j < idx.size(); ++j)
            s += f[j][idx[j]];
        out[k] += s;
    });
    return out;
}

} // namespace mms
