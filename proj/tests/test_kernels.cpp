#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <string>
#include <vector>

#include "atp/kernels.hpp"
#include "atp/rng.hpp"

namespace k = atp::kernels;

namespace {

std::vector<double> random_vec(atp::Rng &rng, std::size_t n) {
    std::vector<double> v(n);
    rng.fill_normal(v.data(), n);
    return v;
}

std::vector<float> to_float(const std::vector<double> &v) {
    std::vector<float> f(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
    return f;
}

// Summing float products in double is accurate to ~1 ulp of each product, so
// it serves as the reference both float paths must approach.
double exact_dot(const std::vector<float> &x, const std::vector<float> &y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return acc;
}

void check_close(const std::vector<double> &a, const std::vector<double> &b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

void check_close(const std::vector<float> &a, const std::vector<float> &b, float tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <= tol * (1.0f + std::abs(b[i])));
}

const std::size_t kVecSizes[] = {1, 2, 3, 7, 8, 15, 16, 17, 33, 100, 1000};

struct Dims {
    std::size_t m, k, n;
};
const Dims kMatDims[] = {{1, 1, 1}, {2, 3, 4},   {5, 8, 3},  {1, 16, 9},
                         {17, 31, 9}, {32, 64, 32}, {9, 1, 5}, {21, 13, 2}};

} // namespace

TEST_CASE("dispatch reports a valid isa and force_scalar pins it") {
    const std::string isa = k::active_isa();
    CHECK((isa == "avx2" || isa == "scalar"));
    if (k::cpu_has_avx2()) CHECK(isa == "avx2");

    k::force_scalar(true);
    CHECK(std::string(k::active_isa()) == "scalar");
    k::force_scalar(false);
    if (k::cpu_has_avx2()) CHECK(std::string(k::active_isa()) == "avx2");
}

TEST_CASE("forced-scalar dispatch is bit-identical to the scalar namespace") {
    atp::Rng rng(7);
    auto x = random_vec(rng, 257);
    auto y = random_vec(rng, 257);
    k::force_scalar(true);
    CHECK(k::dot(x.data(), y.data(), x.size()) ==
          k::scalar::dot(x.data(), y.data(), x.size()));
    k::force_scalar(false);
}

TEST_CASE("small integer cases are exact in every path") {
    const double x[] = {1, 2, 3};
    const double y[] = {4, 5, 6};
    CHECK(k::scalar::dot(x, y, 3) == 32.0);
    CHECK(k::dot(x, y, 3) == 32.0);

    // 2x2 * 2x2 in integers.
    const double a[] = {1, 2, 3, 4};
    const double b[] = {5, 6, 7, 8};
    double c_ref[4], c_disp[4];
    k::scalar::matmul_nn(a, b, c_ref, 2, 2, 2);
    k::matmul_nn(a, b, c_disp, 2, 2, 2);
    CHECK(c_ref[0] == 19.0);
    CHECK(c_ref[1] == 22.0);
    CHECK(c_ref[2] == 43.0);
    CHECK(c_ref[3] == 50.0);
    CHECK(std::memcmp(c_ref, c_disp, sizeof c_ref) == 0);
}

TEST_CASE("vector kernels agree across paths, double") {
    atp::Rng rng(11);
    for (std::size_t n : kVecSizes) {
        CAPTURE(n);
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);

        CHECK(std::abs(k::dot(x.data(), y.data(), n) -
                       k::scalar::dot(x.data(), y.data(), n)) <=
              1e-12 * (1.0 + std::abs(k::scalar::dot(x.data(), y.data(), n))));

        auto y1 = y, y2 = y;
        k::scalar::axpy(0.37, x.data(), y1.data(), n);
        k::axpy(0.37, x.data(), y2.data(), n);
        check_close(y2, y1, 1e-13);

        auto x1 = x, x2 = x;
        k::scalar::scale(-1.25, x1.data(), n);
        k::scale(-1.25, x2.data(), n);
        check_close(x2, x1, 0.0);

        std::vector<double> o1(n), o2(n);
        k::scalar::add(x.data(), y.data(), o1.data(), n);
        k::add(x.data(), y.data(), o2.data(), n);
        check_close(o2, o1, 0.0);
        k::scalar::sub(x.data(), y.data(), o1.data(), n);
        k::sub(x.data(), y.data(), o2.data(), n);
        check_close(o2, o1, 0.0);
    }
}

TEST_CASE("float kernels track the double-accumulated reference") {
    atp::Rng rng(13);
    for (std::size_t n : kVecSizes) {
        CAPTURE(n);
        auto x = to_float(random_vec(rng, n));
        auto y = to_float(random_vec(rng, n));
        const double ref = exact_dot(x, y);
        const double tol = 5e-3 * (1.0 + std::abs(ref));
        CHECK(std::abs(k::scalar::dot(x.data(), y.data(), n) - ref) <= tol);
        CHECK(std::abs(k::dot(x.data(), y.data(), n) - ref) <= tol);
    }
}

TEST_CASE("matmul variants agree across paths") {
    atp::Rng rng(17);
    for (const auto &[m, kk, n] : kMatDims) {
        CAPTURE(m);
        CAPTURE(kk);
        CAPTURE(n);
        auto a = random_vec(rng, m * kk);
        auto b_nn = random_vec(rng, kk * n);
        auto b_nt = random_vec(rng, n * kk);
        auto a_tn = random_vec(rng, kk * m);

        std::vector<double> ref(m * n), out(m * n);
        k::scalar::matmul_nn(a.data(), b_nn.data(), ref.data(), m, kk, n);
        k::matmul_nn(a.data(), b_nn.data(), out.data(), m, kk, n);
        check_close(out, ref, 1e-12);

        k::scalar::matmul_nt(a.data(), b_nt.data(), ref.data(), m, kk, n);
        k::matmul_nt(a.data(), b_nt.data(), out.data(), m, kk, n);
        check_close(out, ref, 1e-12);

        k::scalar::matmul_tn(a_tn.data(), b_nn.data(), ref.data(), m, kk, n);
        k::matmul_tn(a_tn.data(), b_nn.data(), out.data(), m, kk, n);
        check_close(out, ref, 1e-12);
    }
}

TEST_CASE("matmul float variants agree across paths") {
    atp::Rng rng(19);
    for (const auto &[m, kk, n] : kMatDims) {
        CAPTURE(m);
        CAPTURE(kk);
        CAPTURE(n);
        auto a = to_float(random_vec(rng, m * kk));
        auto b = to_float(random_vec(rng, kk * n));
        std::vector<float> ref(m * n), out(m * n);
        k::scalar::matmul_nn(a.data(), b.data(), ref.data(), m, kk, n);
        k::matmul_nn(a.data(), b.data(), out.data(), m, kk, n);
        check_close(out, ref, 1e-3f);
    }
}

TEST_CASE("matvec, matvec_t, rank1_sub, colsum agree across paths") {
    atp::Rng rng(23);
    const std::size_t m = 37, n = 29;
    auto a = random_vec(rng, m * n);
    auto x_n = random_vec(rng, n);
    auto x_m = random_vec(rng, m);

    std::vector<double> ref(m), out(m);
    k::scalar::matvec(a.data(), x_n.data(), ref.data(), m, n);
    k::matvec(a.data(), x_n.data(), out.data(), m, n);
    check_close(out, ref, 1e-12);

    std::vector<double> ref_n(n), out_n(n);
    k::scalar::matvec_t(a.data(), x_m.data(), ref_n.data(), m, n);
    k::matvec_t(a.data(), x_m.data(), out_n.data(), m, n);
    check_close(out_n, ref_n, 1e-12);

    auto a1 = a, a2 = a;
    k::scalar::rank1_sub(a1.data(), x_m.data(), x_n.data(), m, n);
    k::rank1_sub(a2.data(), x_m.data(), x_n.data(), m, n);
    check_close(a2, a1, 1e-13);

    k::scalar::colsum(a.data(), ref_n.data(), m, n);
    k::colsum(a.data(), out_n.data(), m, n);
    check_close(out_n, ref_n, 1e-12);
}

TEST_CASE("softmax_row is stable and consistent across paths") {
    atp::Rng rng(29);
    for (std::size_t n : {1ul, 2ul, 5ul, 8ul, 9ul, 64ul, 257ul}) {
        CAPTURE(n);
        auto x = random_vec(rng, n);
        // Large offsets would overflow exp without max subtraction.
        for (auto &v : x) v = v * 3.0 + 700.0;
        auto x1 = x, x2 = x;
        k::scalar::softmax_row(x1.data(), n);
        k::softmax_row(x2.data(), n);
        check_close(x2, x1, 1e-12);
        double sum = 0.0;
        for (double v : x1) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}
