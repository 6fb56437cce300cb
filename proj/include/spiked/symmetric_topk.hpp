#pragma once

// Largest-k eigenpairs of a dense symmetric matrix: Householder tridiagonalization,
// implicit-QR eigenvalues of the tridiagonal, inverse iteration for the k wanted
// vectors, and back-transformation. Cost is dominated by the O(d^3) reduction,
// without the eigenvector accumulation of a full solve.

#include "spiked/core.hpp"

namespace spiked {

struct TopEigenpairs {
    Vec values;  // descending
    Mat vectors; // d x k, unit columns
};

TopEigenpairs top_eigenpairs(const Mat& S, Index k);

/// All eigenvalues of a symmetric matrix, descending.
Vec symmetric_eigenvalues(const Mat& S);

} // namespace spiked
