#pragma once

#include <cstddef>
#include <cstdint>

#include "atp/matrix.hpp"
#include "atp/opcount.hpp"
#include "atp/svd.hpp"

namespace atp {

// Rank-r factorization X ~= U * Xp. Xp rows carry the scale (each row is
// s_i * v_i^T), so U columns are unit-norm directions only in the exact
// truncation; the alternating path leaves U unnormalized and non-orthogonal.
struct LowRankFactors {
    enum class Method { exact_truncated, alternating };

    Matrix U;  // L x r
    Matrix Xp; // r x d
    std::size_t r = 0;
    bool orthonormal = false;
    Method method = Method::alternating;
};

// Greedy rank-1 fits with deflation: per component, inner_iters rounds of
//   u <- X v / ||v||^2,  v <- X^T u / ||u||^2
// then X <- X - u v^T. Initial u, v are drawn i.i.d. standard normal from
// the seeded stream. Total counted cost is r*L*d*(2*inner_iters + 1)
// multiplies; the norm epilogues stay off the counter.
LowRankFactors alternating_lowrank(const Matrix &x, std::size_t r,
                                   std::size_t inner_iters = 2, std::uint64_t seed = 0,
                                   OpCounter *counter = nullptr);

// Top-r slice of an exact SVD.
LowRankFactors exact_truncate(const SvdResult &svd, std::size_t r);

// Replaces U with an orthonormal basis of its column space (twice-iterated
// Gram-Schmidt) and folds the triangular factor into Xp, preserving the
// product U * Xp.
LowRankFactors reorthogonalize(const LowRankFactors &factors);

// Captured fraction of ||X||_F^2. Orthonormal factors read it off Xp
// directly; otherwise the product U * Xp is measured.
double energy_ratio(const Matrix &x, const LowRankFactors &factors);

// U * Xp.
Matrix reconstruct(const LowRankFactors &factors);

} // namespace atp
