#include "atp/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atp/errors.hpp"
#include "atp/ops.hpp"

namespace atp {

namespace {

constexpr double kOffdiagTol = 1e-12;
constexpr std::size_t kMaxSweeps = 60;

// Hestenes one-sided Jacobi, phrased on rows: the working matrix t starts as
// x^T so that each of x's columns is a contiguous row. A plane rotation of
// rows (p, q) of t diagonalizes their 2x2 Gram block; mirroring every
// rotation into vt (initialized to identity) accumulates the right singular
// vectors as rows. On return row i of t is s_i * u_i^T.
struct JacobiState {
    Matrix t;  // n x m, rows carry the rotated columns of x
    Matrix vt; // n x n, rows carry v_i^T
};

JacobiState jacobi_orthogonalize(const Matrix &x) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    JacobiState st{ops::transpose(x), Matrix(n, n)};
    for (std::size_t i = 0; i < n; ++i) st.vt(i, i) = 1.0;
    if (n == 1) return st;

    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double *tp = st.t.row(p);
                double *tq = st.t.row(q);
                const double a = ops::dot(tp, tp, m);
                const double b = ops::dot(tq, tq, m);
                const double c = ops::dot(tp, tq, m);
                if (std::abs(c) <= kOffdiagTol * std::sqrt(a * b)) continue;
                rotated = true;

                const double zeta = (b - a) / (2.0 * c);
                const double tt = (zeta >= 0.0 ? 1.0 : -1.0) /
                                  (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + tt * tt);
                const double sn = cs * tt;

                for (std::size_t j = 0; j < m; ++j) {
                    const double vp = tp[j], vq = tq[j];
                    tp[j] = cs * vp - sn * vq;
                    tq[j] = sn * vp + cs * vq;
                }
                double *wp = st.vt.row(p);
                double *wq = st.vt.row(q);
                for (std::size_t j = 0; j < n; ++j) {
                    const double vp = wp[j], vq = wq[j];
                    wp[j] = cs * vp - sn * vq;
                    wq[j] = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) return st;
    }
    throw numeric_error("singular value iteration did not converge", kMaxSweeps);
}

// Fills null columns of u (slots whose singular value collapsed) with an
// orthonormal completion. Deterministic: each slot takes the canonical basis
// vector with the largest out-of-span residual, orthogonalized twice.
void complete_basis(Matrix &u, const std::vector<bool> &is_null) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    std::vector<std::size_t> filled;
    for (std::size_t j = 0; j < k; ++j)
        if (!is_null[j]) filled.push_back(j);

    std::vector<double> w(m);
    for (std::size_t j = 0; j < k; ++j) {
        if (!is_null[j]) continue;

        // Residual norm^2 of e_i against the filled columns is
        // 1 - sum_c u(i, c)^2.
        std::size_t best = 0;
        double best_res = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            double proj = 0.0;
            for (std::size_t c : filled) proj += u(i, c) * u(i, c);
            const double res = 1.0 - proj;
            if (res > best_res) {
                best_res = res;
                best = i;
            }
        }

        std::fill(w.begin(), w.end(), 0.0);
        w[best] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c : filled) {
                double proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += u(i, c) * w[i];
                for (std::size_t i = 0; i < m; ++i) w[i] -= proj * u(i, c);
            }
        }
        const double norm = std::sqrt(ops::dot(w.data(), w.data(), m));
        for (std::size_t i = 0; i < m; ++i) u(i, j) = w[i] / norm;
        filled.push_back(j);
    }
}

// Core path for rows >= cols.
SvdResult svd_tall(const Matrix &x) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    JacobiState st = jacobi_orthogonalize(x);

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double *row = st.t.row(i);
        norms[i] = std::sqrt(ops::dot(row, row, m));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    const double sigma_max = norms[order[0]];
    const double null_cut = sigma_max * 1e-14;

    SvdResult out;
    out.singular_values.resize(n);
    out.left_vectors = Matrix::uninit(m, n);
    out.right_vectors = Matrix::uninit(n, n);
    std::vector<bool> is_null(n, false);

    for (std::size_t slot = 0; slot < n; ++slot) {
        const std::size_t src = order[slot];
        const double sigma = norms[src];
        out.singular_values[slot] = sigma;
        for (std::size_t j = 0; j < n; ++j) out.right_vectors(j, slot) = st.vt(src, j);
        if (sigma <= null_cut) {
            // Direction is rounding debris; slot gets a completed basis
            // vector below.
            is_null[slot] = true;
            for (std::size_t i = 0; i < m; ++i) out.left_vectors(i, slot) = 0.0;
        } else {
            const double inv = 1.0 / sigma;
            const double *row = st.t.row(src);
            for (std::size_t i = 0; i < m; ++i) out.left_vectors(i, slot) = row[i] * inv;
        }
    }
    complete_basis(out.left_vectors, is_null);
    return out;
}

void apply_sign_convention(SvdResult &r) {
    const std::size_t m = r.left_vectors.rows();
    const std::size_t n = r.right_vectors.rows();
    const std::size_t k = r.singular_values.size();
    for (std::size_t i = 0; i < k; ++i) {
        double lead = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(r.right_vectors(j, i)) > 1e-12) {
                lead = r.right_vectors(j, i);
                break;
            }
        }
        if (lead >= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) r.right_vectors(j, i) = -r.right_vectors(j, i);
        for (std::size_t j = 0; j < m; ++j) r.left_vectors(j, i) = -r.left_vectors(j, i);
    }
}

} // namespace

SvdResult exact_svd(const Matrix &x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]))
            throw invalid_input_error("non-finite entry in SVD input");

    SvdResult result;
    if (x.rows() >= x.cols()) {
        result = svd_tall(x);
    } else {
        // X = U S V^T  <=>  X^T = V S U^T; swap the vector roles.
        SvdResult t = svd_tall(ops::transpose(x));
        result.singular_values = std::move(t.singular_values);
        result.left_vectors = std::move(t.right_vectors);
        result.right_vectors = std::move(t.left_vectors);
    }
    apply_sign_convention(result);
    return result;
}

} // namespace atp
