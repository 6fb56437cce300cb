#pragma once

// First-order eigenvector perturbation of a symmetric matrix with the
// quadratic remainder bound ||R_r|| <= 10 ||B||^2 / delta_r(A)^2, valid when
// ||B|| < delta_r(A) / 3. Eigenvalues are indexed in decreasing order, r zero based.

#include "spiked/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <limits>

namespace spiked {

template <class Scalar>
struct SortedEigen {
    vec_type<Scalar> values;  // descending
    mat_type<Scalar> vectors; // matching columns
};

template <class Scalar>
SortedEigen<Scalar> sorted_eigen(const mat_type<Scalar>& A) {
    Eigen::SelfAdjointEigenSolver<mat_type<Scalar>> es(A);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("sorted_eigen: eigensolver did not converge");
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// Operator norm of a symmetric matrix.
template <class Scalar>
Scalar sym_norm(const mat_type<Scalar>& B) {
    if (B.size() == 0)
        return Scalar(0);
    Eigen::SelfAdjointEigenSolver<mat_type<Scalar>> es(B, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// min_{j != r} |lambda_j - lambda_r|.
template <class Scalar>
Scalar eigengap(const vec_type<Scalar>& values, Index r) {
    Scalar gap = std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < values.size(); ++j)
        if (j != r)
            gap = std::min(gap, std::abs(values(j) - values(r)));
    return gap;
}

/// H_r(A) = sum_{s != r} (lambda_s - lambda_r)^{-1} P_s(A).
///
/// Eigenvalues other than lambda_r that agree to 1e-10 ||A|| share one projector.
template <class Scalar>
mat_type<Scalar> reduced_resolvent(const mat_type<Scalar>& A, Index r) {
    const Index m = A.rows();
    if (A.cols() != m || r < 0 || r >= m)
        throw DomainError("reduced_resolvent: need a square matrix and a valid index");
    const auto eig = sorted_eigen<Scalar>(A);
    const Scalar scale = std::max(eig.values.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
    const Scalar tol = Scalar(1e-10) * scale;
    if (eigengap<Scalar>(eig.values, r) <= tol)
        throw DegenerateSpectrumError("reduced_resolvent: target eigenvalue is not simple");

    mat_type<Scalar> H = mat_type<Scalar>::Zero(m, m);
    Index s = 0;
    while (s < m) {
        if (s == r) {
            ++s;
            continue;
        }
        Index e = s + 1;
        while (e < m && e != r && std::abs(eig.values(e) - eig.values(s)) <= tol) ++e;
        const Scalar lambda = eig.values.segment(s, e - s).mean();
        const auto V = eig.vectors.middleCols(s, e - s);
        H.noalias() += (V * V.transpose()) / (lambda - eig.values(r));
        s = e;
    }
    return H;
}

template <class Scalar>
struct PerturbationResult {
    Index r = 0;
    vec_type<Scalar> first_order_vec; // p_r(A) - H_r(A) B p_r(A)
    vec_type<Scalar> exact_vec;       // p_r(A + B), sign-aligned with p_r(A)
    Scalar remainder_norm = 0;
    Scalar bound = 0;                 // 10 ||B||^2 / delta_r^2
    Scalar delta_r = 0;
    Scalar b_norm = 0;
    bool applicable = false;          // ||B|| < delta_r / 3

    bool within_bound() const { return remainder_norm <= bound; }
};

template <class Scalar>
PerturbationResult<Scalar> first_order_eigvec(const mat_type<Scalar>& A, const mat_type<Scalar>& B, Index r) {
    const Index m = A.rows();
    if (B.rows() != m || B.cols() != m)
        throw DomainError("first_order_eigvec: A and B must have the same shape");
    const auto eig = sorted_eigen<Scalar>(A);
    const mat_type<Scalar> H = reduced_resolvent<Scalar>(A, r);
    const vec_type<Scalar> p = eig.vectors.col(r);

    PerturbationResult<Scalar> out;
    out.r = r;
    out.delta_r = eigengap<Scalar>(eig.values, r);
    out.b_norm = sym_norm<Scalar>(B);
    out.bound = Scalar(10) * out.b_norm * out.b_norm / (out.delta_r * out.delta_r);
    out.applicable = out.b_norm < out.delta_r / Scalar(3);
    out.first_order_vec = p - H * (B * p);

    const auto perturbed = sorted_eigen<Scalar>(mat_type<Scalar>(A + B));
    out.exact_vec = perturbed.vectors.col(r);
    if (p.dot(out.exact_vec) < Scalar(0))
        out.exact_vec = -out.exact_vec;
    out.remainder_norm = (out.exact_vec - out.first_order_vec).norm();
    return out;
}

/// Summary of a randomized check of the remainder bound.
struct PerturbationFuzzSummary {
    std::int64_t trials = 0;
    std::int64_t applicable = 0;
    std::int64_t violations = 0;
    double max_constant = 0.0;          // max remainder / (||B||^2 / delta^2) over applicable trials
    double median_remainder = 0.0;      // at ||B|| = ratio * delta
    double median_remainder_half = 0.0; // same trials with B / 2
    double median_shrink = 0.0;         // median of per-trial remainder(B) / remainder(B/2)
};

/// Random (A, B, r) with simple spectrum, ||B|| = gap_ratio * delta_r(A); dimensions cycle over [dim_min, dim_max].
PerturbationFuzzSummary fuzz_perturbation(std::int64_t trials, Index dim_min, Index dim_max, double gap_ratio,
                                          std::uint64_t seed);

} // namespace spiked
