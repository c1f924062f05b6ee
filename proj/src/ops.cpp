#include "atp/ops.hpp"

#include <cmath>
#include <string>

#include "atp/kernels.hpp"

namespace atp::ops {

namespace {

void require(bool ok, const std::string &msg) {
    if (!ok) throw invalid_input_error(msg);
}

std::string shape(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// One multiply-accumulate tally per output entry of an m x n product over a
// k-deep reduction.
void count_matmul(OpCounter *c, std::size_t m, std::size_t k, std::size_t n) {
    if (!c) return;
    const auto mm = static_cast<std::uint64_t>(m);
    const auto kk = static_cast<std::uint64_t>(k);
    const auto nn = static_cast<std::uint64_t>(n);
    c->count_mul_add(mm * kk * nn, mm * nn * (kk - 1));
}

} // namespace

Matrix matmul(const Matrix &a, const Matrix &b, OpCounter *counter) {
    require(a.cols() == b.rows(), "matmul shape mismatch: " + shape(a) + " * " + shape(b));
    Matrix c = Matrix::uninit(a.rows(), b.cols());
    kernels::matmul_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    count_matmul(counter, a.rows(), a.cols(), b.cols());
    return c;
}

Matrix matmul_nt(const Matrix &a, const Matrix &b, OpCounter *counter) {
    require(a.cols() == b.cols(), "matmul_nt shape mismatch: " + shape(a) + " * " + shape(b) + "^T");
    Matrix c = Matrix::uninit(a.rows(), b.rows());
    kernels::matmul_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
    count_matmul(counter, a.rows(), a.cols(), b.rows());
    return c;
}

Matrix matmul_tn(const Matrix &a, const Matrix &b, OpCounter *counter) {
    require(a.rows() == b.rows(), "matmul_tn shape mismatch: " + shape(a) + "^T * " + shape(b));
    Matrix c = Matrix::uninit(a.cols(), b.cols());
    kernels::matmul_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
    count_matmul(counter, a.cols(), a.rows(), b.cols());
    return c;
}

void matvec(const Matrix &a, const double *x, double *y, OpCounter *counter) {
    kernels::matvec(a.data(), x, y, a.rows(), a.cols());
    count_matmul(counter, a.rows(), a.cols(), 1);
}

void matvec_t(const Matrix &a, const double *x, double *y, OpCounter *counter) {
    kernels::matvec_t(a.data(), x, y, a.rows(), a.cols());
    count_matmul(counter, a.cols(), a.rows(), 1);
}

void rank1_sub(Matrix &a, const double *u, const double *v, OpCounter *counter) {
    kernels::rank1_sub(a.data(), u, v, a.rows(), a.cols());
    if (counter) {
        const auto entries = static_cast<std::uint64_t>(a.rows()) * a.cols();
        counter->count_mul_add(entries, entries);
    }
}

Matrix transpose(const Matrix &a) {
    Matrix t = Matrix::uninit(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix &a, const Matrix &b) {
    require(a.same_shape(b), "add shape mismatch: " + shape(a) + " vs " + shape(b));
    Matrix c = Matrix::uninit(a.rows(), a.cols());
    kernels::add(a.data(), b.data(), c.data(), a.size());
    return c;
}

Matrix sub(const Matrix &a, const Matrix &b) {
    require(a.same_shape(b), "sub shape mismatch: " + shape(a) + " vs " + shape(b));
    Matrix c = Matrix::uninit(a.rows(), a.cols());
    kernels::sub(a.data(), b.data(), c.data(), a.size());
    return c;
}

double frob_norm(const Matrix &a) {
    return std::sqrt(kernels::dot(a.data(), a.data(), a.size()));
}

double max_abs_diff(const Matrix &a, const Matrix &b) {
    require(a.same_shape(b), "max_abs_diff shape mismatch: " + shape(a) + " vs " + shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

double dot(const double *x, const double *y, std::size_t n) {
    return kernels::dot(x, y, n);
}

} // namespace atp::ops
