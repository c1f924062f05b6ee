#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "atp/entropy.hpp"
#include "atp/lowrank.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"
#include "atp/svd.hpp"

using atp::Matrix;

namespace {

Matrix random_matrix(atp::Rng &rng, std::size_t m, std::size_t n) {
    Matrix x = Matrix::uninit(m, n);
    rng.fill_normal(x.data(), x.size());
    return x;
}

// Independent spectrum oracle: classic two-sided Jacobi eigenvalues of the
// Gram matrix of the smaller side. A different algorithm on a different
// matrix than the library's one-sided path.
std::vector<double> gram_spectrum(const Matrix &x) {
    Matrix g = x.rows() <= x.cols() ? atp::ops::matmul_nt(x, x)
                                    : atp::ops::matmul_tn(x, x);
    const std::size_t n = g.rows();
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            total += g(i, j) * g(i, j);
            if (i != j) off += g(i, j) * g(i, j);
        }
    for (int sweep = 0; sweep < 100 && off > 1e-28 * total; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (g(p, q) == 0.0) continue;
                const double theta = (g(q, q) - g(p, p)) / (2.0 * g(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double gp = g(p, k), gq = g(q, k);
                    g(p, k) = c * gp - s * gq;
                    g(q, k) = s * gp + c * gq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double gp = g(k, p), gq = g(k, q);
                    g(k, p) = c * gp - s * gq;
                    g(k, q) = s * gp + c * gq;
                }
            }
        }
        off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += g(i, j) * g(i, j);
    }
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(std::max(0.0, g(i, i)));
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    return sigma;
}

double orthonormality_defect(const Matrix &u) {
    Matrix gram = atp::ops::matmul_tn(u, u);
    double worst = 0.0;
    for (std::size_t i = 0; i < gram.rows(); ++i)
        for (std::size_t j = 0; j < gram.cols(); ++j)
            worst = std::max(worst, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

double reconstruction_error(const Matrix &x, const atp::SvdResult &svd) {
    Matrix approx(x.rows(), x.cols());
    for (std::size_t i = 0; i < svd.singular_values.size(); ++i)
        for (std::size_t a = 0; a < x.rows(); ++a)
            for (std::size_t b = 0; b < x.cols(); ++b)
                approx(a, b) += svd.singular_values[i] * svd.left_vectors(a, i) *
                                svd.right_vectors(b, i);
    return atp::ops::frob_norm(atp::ops::sub(x, approx)) / atp::ops::frob_norm(x);
}

// Orthonormal columns via plain Gram-Schmidt on Gaussian draws (test-local).
Matrix random_orthonormal(atp::Rng &rng, std::size_t m, std::size_t k) {
    Matrix q = random_matrix(rng, m, k);
    for (std::size_t j = 0; j < k; ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i < j; ++i) {
                double proj = 0.0;
                for (std::size_t a = 0; a < m; ++a) proj += q(a, i) * q(a, j);
                for (std::size_t a = 0; a < m; ++a) q(a, j) -= proj * q(a, i);
            }
        double norm = 0.0;
        for (std::size_t a = 0; a < m; ++a) norm += q(a, j) * q(a, j);
        norm = std::sqrt(norm);
        for (std::size_t a = 0; a < m; ++a) q(a, j) /= norm;
    }
    return q;
}

Matrix from_spectrum(atp::Rng &rng, std::size_t m, std::size_t n,
                     const std::vector<double> &sigma) {
    const std::size_t k = sigma.size();
    Matrix u = random_orthonormal(rng, m, k);
    Matrix v = random_orthonormal(rng, n, k);
    Matrix x(m, n);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < n; ++b)
                x(a, b) += sigma[i] * u(a, i) * v(b, i);
    return x;
}

} // namespace

TEST_CASE("svd of identity and diagonal matrices") {
    Matrix eye(2, 2, {1, 0, 0, 1});
    auto svd = atp::exact_svd(eye);
    REQUIRE(svd.singular_values.size() == 2);
    CHECK(svd.singular_values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(svd.singular_values[1] == doctest::Approx(1.0).epsilon(1e-12));

    Matrix diag(2, 2, {3, 0, 0, 4});
    svd = atp::exact_svd(diag);
    CHECK(svd.singular_values[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(svd.singular_values[1] == doctest::Approx(3.0).epsilon(1e-12));
    // Dominant right vector is e2, runner-up e1; sign convention makes the
    // leading entries positive.
    CHECK(std::abs(svd.right_vectors(1, 0) - 1.0) < 1e-10);
    CHECK(std::abs(svd.right_vectors(0, 1) - 1.0) < 1e-10);
    CHECK(std::abs(svd.left_vectors(1, 0) - 1.0) < 1e-10);
}

TEST_CASE("rank-2 product: spectrum matches the Gram oracle, nulls detected") {
    atp::Rng rng(101);
    Matrix a = random_matrix(rng, 5, 2);
    Matrix b = random_matrix(rng, 2, 8);
    Matrix x = atp::ops::matmul(a, b);

    auto svd = atp::exact_svd(x);
    REQUIRE(svd.singular_values.size() == 5);
    CHECK(svd.singular_values[1] > 1e-10);
    CHECK(svd.singular_values[2] <= 1e-10);
    CHECK(svd.singular_values[4] <= 1e-10);
    CHECK(reconstruction_error(x, svd) < 1e-10);

    auto oracle = gram_spectrum(x);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(svd.singular_values[i] - oracle[i]) <=
              1e-8 * (1.0 + oracle[0]));

    CHECK(orthonormality_defect(svd.left_vectors) <= 1e-10);
    CHECK(orthonormality_defect(svd.right_vectors) <= 1e-10);
}

TEST_CASE("svd contract holds across shapes") {
    atp::Rng rng(7);
    const std::pair<std::size_t, std::size_t> shapes[] = {
        {1, 1}, {1, 7}, {7, 1}, {3, 3}, {16, 8}, {8, 16}, {64, 64}, {96, 40}};
    for (auto [m, n] : shapes) {
        CAPTURE(m);
        CAPTURE(n);
        Matrix x = random_matrix(rng, m, n);
        auto svd = atp::exact_svd(x);
        const std::size_t k = std::min(m, n);
        REQUIRE(svd.singular_values.size() == k);
        REQUIRE(svd.left_vectors.rows() == m);
        REQUIRE(svd.left_vectors.cols() == k);
        REQUIRE(svd.right_vectors.rows() == n);
        REQUIRE(svd.right_vectors.cols() == k);

        for (std::size_t i = 0; i + 1 < k; ++i)
            CHECK(svd.singular_values[i] >= svd.singular_values[i + 1]);
        CHECK(svd.singular_values[k - 1] >= 0.0);
        CHECK(orthonormality_defect(svd.left_vectors) <= 1e-10);
        CHECK(orthonormality_defect(svd.right_vectors) <= 1e-10);
        CHECK(reconstruction_error(x, svd) <= 1e-8);

        auto oracle = gram_spectrum(x);
        for (std::size_t i = 0; i < k; ++i)
            CHECK(std::abs(svd.singular_values[i] - oracle[i]) <=
                  1e-8 * (1.0 + oracle[0]));

        // First nonzero entry of each right vector is positive.
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (std::abs(svd.right_vectors(j, i)) > 1e-12) {
                    CHECK(svd.right_vectors(j, i) > 0.0);
                    break;
                }
            }
    }
}

TEST_CASE("svd of the zero matrix still yields orthonormal bases") {
    Matrix z(4, 3);
    auto svd = atp::exact_svd(z);
    for (double s : svd.singular_values) CHECK(s == 0.0);
    CHECK(orthonormality_defect(svd.left_vectors) <= 1e-12);
    CHECK(orthonormality_defect(svd.right_vectors) <= 1e-12);
}

TEST_CASE("svd is deterministic") {
    atp::Rng rng(55);
    Matrix x = random_matrix(rng, 20, 13);
    auto a = atp::exact_svd(x);
    auto b = atp::exact_svd(x);
    CHECK(a.singular_values == b.singular_values);
    CHECK(atp::ops::max_abs_diff(a.left_vectors, b.left_vectors) == 0.0);
    CHECK(atp::ops::max_abs_diff(a.right_vectors, b.right_vectors) == 0.0);
}

TEST_CASE("entropy of reference spectra") {
    auto r = atp::svd_entropy({5, 0, 0}, 3);
    CHECK(r.mu == 0.0);
    CHECK(r.effective_rank == 1);
    CHECK(r.ratio == doctest::Approx(1.0 / 3.0));

    r = atp::svd_entropy({0.37, 0.37, 0.37, 0.37}, 4);
    CHECK(r.mu == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.effective_rank == 4);
    CHECK(r.ratio == doctest::Approx(1.0));

    // sbar = (4/7, 3/7), sum of squares 25/49.
    r = atp::svd_entropy({4, 3}, 2);
    CHECK(r.mu == doctest::Approx(std::log2(49.0 / 25.0)).epsilon(1e-14));
    CHECK(r.effective_rank == 2);

    // Order does not matter; the spectrum is re-sorted.
    auto r2 = atp::svd_entropy({3, 4}, 2);
    CHECK(r2.mu == r.mu);
}

TEST_CASE("entropy rejects degenerate and invalid spectra") {
    CHECK_THROWS_AS(atp::svd_entropy({0.0, 0.0}, 2), atp::degenerate_input_error);
    CHECK_THROWS_AS(atp::svd_entropy({}, 2), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::svd_entropy({1.0, -0.5}, 2), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::svd_entropy({1.0}, 0), atp::invalid_input_error);
}

TEST_CASE("entropy bounds and scale invariance on random spectra") {
    atp::Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 32);
        std::vector<double> sigma(m);
        for (auto &s : sigma) s = std::exp(2.0 * rng.normal());
        const std::size_t L = m + static_cast<std::size_t>(rng.uniform() * 64);

        auto r = atp::svd_entropy(sigma, L);
        CHECK(r.mu >= 0.0);
        CHECK(r.mu <= std::log2(static_cast<double>(m)) + 1e-12);
        CHECK(r.effective_rank >= 1);
        CHECK(r.effective_rank <= m);

        std::vector<double> scaled = sigma;
        for (auto &s : scaled) s *= 773.25;
        auto rs = atp::svd_entropy(scaled, L);
        CHECK(std::abs(rs.mu - r.mu) <= 1e-12);
    }
}

TEST_CASE("rank selection policies") {
    atp::EntropyReport flat;
    flat.mu = 0.0;
    CHECK(atp::select_rank(flat, atp::RankPolicy::Fraction(0.5), 512, 768) == 256);
    CHECK(atp::select_rank(flat, atp::RankPolicy::Entropy(1.0), 100, 100) == 1);
    CHECK(atp::select_rank(flat, atp::RankPolicy::Fixed(1000000), 64, 64) == 64);
    CHECK(atp::select_rank(flat, atp::RankPolicy::Fraction(1.0), 64, 32) == 32);
    // ceil(6 * 1/3) is 2, not 3, despite 1/3 rounding up in binary.
    CHECK(atp::select_rank(flat, atp::RankPolicy::Fraction(1.0 / 3.0), 6, 6) == 2);

    atp::EntropyReport half;
    half.mu = 5.0;
    CHECK(atp::select_rank(half, atp::RankPolicy::Entropy(1.0), 100, 100) == 32);
    CHECK(atp::select_rank(half, atp::RankPolicy::Entropy(2.0), 100, 48) == 48);

    CHECK_THROWS_AS(atp::RankPolicy::Fraction(0.0), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::RankPolicy::Fraction(1.5), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::RankPolicy::Fixed(0), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::RankPolicy::Entropy(0.0), atp::invalid_input_error);
}

TEST_CASE("alternating factorization recovers exact low rank") {
    atp::Rng rng(31);
    Matrix u = random_matrix(rng, 12, 1);
    Matrix v = random_matrix(rng, 1, 9);
    Matrix x = atp::ops::matmul(u, v);

    auto f = atp::alternating_lowrank(x, 1, 2, 3);
    CHECK(f.r == 1);
    CHECK_FALSE(f.orthonormal);
    CHECK(atp::ops::frob_norm(atp::ops::sub(x, atp::reconstruct(f))) <= 1e-10);

    // Full rank exhausts the matrix by deflation.
    Matrix y = random_matrix(rng, 10, 6);
    auto full = atp::alternating_lowrank(y, 6, 2, 4);
    CHECK(atp::ops::frob_norm(atp::ops::sub(y, atp::reconstruct(full))) /
              atp::ops::frob_norm(y) <=
          1e-8);
}

TEST_CASE("alternating factorization approaches the best rank-1 residual") {
    Matrix x(2, 2, {4, 0, 0, 3});
    // Two inner rounds leave the iterate partially aligned; more rounds
    // converge to the dominant pair and the optimal residual of 3.
    auto f = atp::alternating_lowrank(x, 1, 30, 12);
    const double resid = atp::ops::frob_norm(atp::ops::sub(x, atp::reconstruct(f)));
    CHECK(std::abs(resid - 3.0) <= 1e-6);
}

TEST_CASE("alternating cost model: exact counts, linear in L") {
    atp::Rng rng(41);
    const std::size_t L = 48, d = 20, r = 5, inner = 2;
    Matrix x = random_matrix(rng, L, d);
    atp::OpCounter counter;
    atp::alternating_lowrank(x, r, inner, 9, &counter);
    CHECK(counter.multiplies == static_cast<std::uint64_t>(r) * L * d * (2 * inner + 1));

    Matrix x2 = random_matrix(rng, 2 * L, d);
    atp::OpCounter counter2;
    atp::alternating_lowrank(x2, r, inner, 9, &counter2);
    const double ratio = static_cast<double>(counter2.multiplies) /
                         static_cast<double>(counter.multiplies);
    CHECK(ratio >= 1.9);
    CHECK(ratio <= 2.1);
}

TEST_CASE("alternating residual stays near the exact truncation on decaying spectra") {
    atp::Rng rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 24 + static_cast<std::size_t>(rng.uniform() * 40);
        const std::size_t n = 24 + static_cast<std::size_t>(rng.uniform() * 40);
        const std::size_t k = std::min(m, n);
        // Sustained geometric decay, and more refinement rounds than the
        // default two. At two rounds an unlucky init swaps components across
        // the rank boundary and the lost gap costs well over 5% of the
        // residual; ten rounds keep the worst case under the bound.
        const double rho = 0.88 + 0.02 * rng.uniform();
        std::vector<double> sigma(k);
        double cur = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            sigma[i] = cur;
            cur *= rho;
        }
        Matrix x = from_spectrum(rng, m, n, sigma);
        const std::size_t r = 1 + static_cast<std::size_t>(rng.uniform() * 4);

        double best2 = 0.0;
        for (std::size_t i = r; i < k; ++i) best2 += sigma[i] * sigma[i];
        const double best = std::sqrt(best2);

        auto f = atp::alternating_lowrank(x, r, 10, 1000 + trial);
        const double resid = atp::ops::frob_norm(atp::ops::sub(x, atp::reconstruct(f)));
        CHECK(resid >= best * (1.0 - 1e-9));
        CHECK(resid <= best * 1.05);
    }
}

TEST_CASE("alternating factorization edge cases") {
    Matrix x(4, 4);
    CHECK_THROWS_AS(atp::alternating_lowrank(x, 1, 2, 0), atp::degenerate_component_error);
    Matrix y(4, 3, std::vector<double>(12, 1.0));
    CHECK_THROWS_AS(atp::alternating_lowrank(y, 4, 2, 0), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::alternating_lowrank(y, 0, 2, 0), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::alternating_lowrank(y, 1, 0, 0), atp::invalid_input_error);

    // Same seed, same factors.
    atp::Rng rng(77);
    Matrix z = random_matrix(rng, 15, 11);
    auto a = atp::alternating_lowrank(z, 3, 2, 123);
    auto b = atp::alternating_lowrank(z, 3, 2, 123);
    CHECK(atp::ops::max_abs_diff(a.U, b.U) == 0.0);
    CHECK(atp::ops::max_abs_diff(a.Xp, b.Xp) == 0.0);
}

TEST_CASE("reorthogonalize restores orthonormal columns and keeps the product") {
    atp::Rng rng(83);
    Matrix x = random_matrix(rng, 64, 30);
    auto f = atp::alternating_lowrank(x, 8, 2, 5);
    Matrix before = atp::reconstruct(f);

    auto g = atp::reorthogonalize(f);
    CHECK(g.orthonormal);
    CHECK(orthonormality_defect(g.U) <= 1e-10);
    CHECK(atp::ops::max_abs_diff(atp::reconstruct(g), before) <= 1e-10);

    // Fixed point on already-orthonormal factors.
    auto h = atp::reorthogonalize(g);
    CHECK(atp::ops::max_abs_diff(h.U, g.U) <= 1e-12);
    CHECK(atp::ops::max_abs_diff(h.Xp, g.Xp) <= 1e-12);
}

TEST_CASE("reorthogonalize flags collapsed columns") {
    Matrix u(4, 2, {1, 1, 1, 1, 0, 0, 0, 0});
    atp::LowRankFactors f;
    f.U = u;
    f.Xp = Matrix(2, 3, {1, 2, 3, 4, 5, 6});
    f.r = 2;
    try {
        atp::reorthogonalize(f);
        FAIL("expected rank_deficiency_error");
    } catch (const atp::rank_deficiency_error &e) {
        CHECK(e.column() == 1);
    }
}

TEST_CASE("energy ratio of exact truncations") {
    Matrix x(2, 2, {4, 0, 0, 3});
    auto svd = atp::exact_svd(x);

    auto full = atp::exact_truncate(svd, 2);
    CHECK(std::abs(atp::energy_ratio(x, full) - 1.0) <= 1e-10);

    auto rank1 = atp::exact_truncate(svd, 1);
    CHECK(atp::energy_ratio(x, rank1) == doctest::Approx(0.64).epsilon(1e-10));

    // Monotone in the kept rank.
    atp::Rng rng(91);
    Matrix y = random_matrix(rng, 20, 12);
    auto ysvd = atp::exact_svd(y);
    double prev = 0.0;
    for (std::size_t r = 1; r <= 12; ++r) {
        const double e = atp::energy_ratio(y, atp::exact_truncate(ysvd, r));
        CHECK(e >= prev - 1e-12);
        prev = e;
    }
    CHECK(std::abs(prev - 1.0) <= 1e-10);

    Matrix z(3, 3);
    CHECK_THROWS_AS(atp::energy_ratio(z, rank1), atp::invalid_input_error);
    atp::LowRankFactors zf;
    zf.U = Matrix(3, 1, {1, 0, 0});
    zf.Xp = Matrix(1, 3, {0, 0, 0});
    zf.r = 1;
    CHECK_THROWS_AS(atp::energy_ratio(z, zf), atp::degenerate_input_error);
}

TEST_CASE("energy ratio for non-orthonormal factors measures the reconstruction") {
    atp::Rng rng(97);
    Matrix x = random_matrix(rng, 30, 18);
    auto f = atp::alternating_lowrank(x, 5, 2, 8);
    const double raw = atp::energy_ratio(x, f);
    const double ortho = atp::energy_ratio(x, atp::reorthogonalize(f));
    // Same captured energy either way; the orthonormal path just reads it
    // off Xp.
    CHECK(std::abs(raw - ortho) <= 1e-10);
    CHECK(raw > 0.0);
    CHECK(raw <= 1.0 + 1e-12);
}
