#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mms {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// A family of N functions, one per marginal space (phi, mu, h, theta, ...).
template <typename Scalar>
using Family = std::vector<VectorX<Scalar>>;

enum class ErrorKind {
    ShapeMismatch,
    NonPositiveEntry,
    MassImbalance,
    NonFinite,
    LengthMismatch,
    Overflow,
    SizeCapExceeded,
    NotInRange,
    NotConverged,
    LineSearchFailed,
    BandInfeasible,
    AllTrialsFailed,
    ParseError,
    SchemaError,
    IoError,
    InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonPositiveEntry: return "NonPositiveEntry";
    case ErrorKind::MassImbalance: return "MassImbalance";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::SizeCapExceeded: return "SizeCapExceeded";
    case ErrorKind::NotInRange: return "NotInRange";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::LineSearchFailed: return "LineSearchFailed";
    case ErrorKind::BandInfeasible: return "BandInfeasible";
    case ErrorKind::AllTrialsFailed: return "AllTrialsFailed";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <typename Scalar>
Index total_size(const Family<Scalar>& f) {
    Index n = 0;
    for (const auto& fi : f)
        n += fi.size();
    return n;
}

template <typename Scalar>
VectorX<Scalar> stack(const Family<Scalar>& f) {
    VectorX<Scalar> out(total_size(f));
    Index offset = 0;
    for (const auto& fi : f) {
        out.segment(offset, fi.size()) = fi;
        offset += fi.size();
    }
    return out;
}

/// Inverse of stack(): split a flat vector into blocks of the given sizes.
template <typename Scalar, typename Derived>
Family<Scalar> unstack(const Eigen::MatrixBase<Derived>& flat, const std::vector<Index>& sizes) {
    Family<Scalar> out;
    out.reserve(sizes.size());
    Index offset = 0;
    for (Index n : sizes) {
        out.emplace_back(flat.segment(offset, n));
        offset += n;
    }
    return out;
}

template <typename Scalar>
Family<Scalar> operator+(const Family<Scalar>& a, const Family<Scalar>& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::ShapeMismatch, "family sizes differ");
    Family<Scalar> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size())
            throw Error(ErrorKind::ShapeMismatch, "component sizes differ");
        out[i] = a[i] + b[i];
    }
    return out;
}

template <typename Scalar>
Family<Scalar> operator-(const Family<Scalar>& a, const Family<Scalar>& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::ShapeMismatch, "family sizes differ");
    Family<Scalar> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size())
            throw Error(ErrorKind::ShapeMismatch, "component sizes differ");
        out[i] = a[i] - b[i];
    }
    return out;
}

template <typename Scalar>
Family<Scalar> operator*(Scalar s, const Family<Scalar>& a) {
    Family<Scalar> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = s * a[i];
    return out;
}

template <typename Scalar>
Scalar max_abs(const Family<Scalar>& f) {
    Scalar m(0);
    for (const auto& fi : f)
        if (fi.size() > 0)
            m = std::max(m, fi.cwiseAbs().maxCoeff());
    return m;
}

template <typename Scalar>
bool all_finite(const Family<Scalar>& f) {
    for (const auto& fi : f)
        if (!fi.allFinite())
            return false;
    return true;
}

} // namespace mms
