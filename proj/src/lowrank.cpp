#include "atp/lowrank.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "atp/errors.hpp"
#include "atp/kernels.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"

namespace atp {

LowRankFactors alternating_lowrank(const Matrix &x, std::size_t r, std::size_t inner_iters,
                                   std::uint64_t seed, OpCounter *counter) {
    const std::size_t L = x.rows();
    const std::size_t d = x.cols();
    if (r == 0 || r > std::min(L, d))
        throw invalid_input_error("rank " + std::to_string(r) + " outside [1, min(" +
                                  std::to_string(L) + ", " + std::to_string(d) + ")]");
    if (inner_iters == 0) throw invalid_input_error("inner_iters must be positive");

    Matrix a = x; // deflated in place
    Matrix u_cols = Matrix::uninit(L, r);
    Matrix xp = Matrix::uninit(r, d);
    Rng rng(seed);
    std::vector<double> u(L);
    std::vector<double> v(d);

    for (std::size_t comp = 0; comp < r; ++comp) {
        std::size_t retries = 0;
        bool fitted = false;
        while (!fitted) {
            rng.fill_normal(u.data(), L);
            rng.fill_normal(v.data(), d);
            fitted = true;
            for (std::size_t j = 0; j < inner_iters; ++j) {
                const double v_norm2 = ops::dot(v.data(), v.data(), d);
                if (v_norm2 < 1e-300) {
                    fitted = false;
                    break;
                }
                ops::matvec(a, v.data(), u.data(), counter);
                kernels::scale(1.0 / v_norm2, u.data(), L);

                const double u_norm2 = ops::dot(u.data(), u.data(), L);
                if (u_norm2 < 1e-300) {
                    fitted = false;
                    break;
                }
                ops::matvec_t(a, u.data(), v.data(), counter);
                kernels::scale(1.0 / u_norm2, v.data(), d);
            }
            if (!fitted && ++retries > 3)
                throw degenerate_component_error("component norm collapsed", comp);
        }

        for (std::size_t i = 0; i < L; ++i) u_cols(i, comp) = u[i];
        for (std::size_t j = 0; j < d; ++j) xp(comp, j) = v[j];
        ops::rank1_sub(a, u.data(), v.data(), counter);
    }

    LowRankFactors f;
    f.U = std::move(u_cols);
    f.Xp = std::move(xp);
    f.r = r;
    f.orthonormal = false;
    f.method = LowRankFactors::Method::alternating;
    return f;
}

LowRankFactors exact_truncate(const SvdResult &svd, std::size_t r) {
    const std::size_t m = svd.singular_values.size();
    if (r == 0 || r > m)
        throw invalid_input_error("truncation rank " + std::to_string(r) + " outside [1, " +
                                  std::to_string(m) + "]");
    const std::size_t L = svd.left_vectors.rows();
    const std::size_t d = svd.right_vectors.rows();

    LowRankFactors f;
    f.U = Matrix::uninit(L, r);
    f.Xp = Matrix::uninit(r, d);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t c = 0; c < r; ++c) f.U(i, c) = svd.left_vectors(i, c);
    for (std::size_t c = 0; c < r; ++c) {
        const double s = svd.singular_values[c];
        for (std::size_t j = 0; j < d; ++j) f.Xp(c, j) = s * svd.right_vectors(j, c);
    }
    f.r = r;
    f.orthonormal = true;
    f.method = LowRankFactors::Method::exact_truncated;
    return f;
}

LowRankFactors reorthogonalize(const LowRankFactors &factors) {
    const std::size_t L = factors.U.rows();
    const std::size_t r = factors.U.cols();
    Matrix q = factors.U;
    Matrix rmat(r, r); // upper triangular, Q * R = U

    for (std::size_t j = 0; j < r; ++j) {
        double *qj = q.data() + j; // column j, stride r
        // Two Gram-Schmidt passes keep the basis orthonormal even when the
        // incoming columns are strongly correlated.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                double proj = 0.0;
                for (std::size_t k = 0; k < L; ++k) proj += q(k, i) * qj[k * r];
                for (std::size_t k = 0; k < L; ++k) qj[k * r] -= proj * q(k, i);
                rmat(i, j) += proj;
            }
        }
        double norm2 = 0.0;
        for (std::size_t k = 0; k < L; ++k) norm2 += qj[k * r] * qj[k * r];
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12)
            throw rank_deficiency_error("column space collapsed during orthogonalization", j);
        rmat(j, j) = norm;
        const double inv = 1.0 / norm;
        for (std::size_t k = 0; k < L; ++k) qj[k * r] *= inv;
    }

    LowRankFactors out;
    out.U = std::move(q);
    out.Xp = ops::matmul(rmat, factors.Xp);
    out.r = factors.r;
    out.orthonormal = true;
    out.method = factors.method;
    return out;
}

double energy_ratio(const Matrix &x, const LowRankFactors &factors) {
    if (factors.U.rows() != x.rows() || factors.Xp.cols() != x.cols() ||
        factors.U.cols() != factors.Xp.rows())
        throw invalid_input_error("factor shapes inconsistent with source matrix");
    const double denom = ops::dot(x.data(), x.data(), x.size());
    if (denom == 0.0) throw degenerate_input_error("zero-norm matrix has no energy ratio");
    if (factors.orthonormal) {
        return ops::dot(factors.Xp.data(), factors.Xp.data(), factors.Xp.size()) / denom;
    }
    const Matrix rec = reconstruct(factors);
    return ops::dot(rec.data(), rec.data(), rec.size()) / denom;
}

Matrix reconstruct(const LowRankFactors &factors) { return ops::matmul(factors.U, factors.Xp); }

} // namespace atp
