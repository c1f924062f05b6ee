#pragma once

#include <vector>

#include "atp/matrix.hpp"

namespace atp {

// Full SVD of an L x d matrix: X = sum_i s_i * u_i * v_i^T with m = min(L, d)
// terms, singular values sorted non-increasing, left/right vectors stored as
// columns. Signs are fixed so the first nonzero entry of each right vector is
// positive.
struct SvdResult {
    std::vector<double> singular_values;
    Matrix left_vectors;  // rows x m
    Matrix right_vectors; // cols x m
};

// One-sided Jacobi on column pairs, iterated to a 1e-12 relative off-diagonal
// tolerance. Throws numeric_error with the sweep count if the rotation sweeps
// fail to settle.
SvdResult exact_svd(const Matrix &x);

} // namespace atp
