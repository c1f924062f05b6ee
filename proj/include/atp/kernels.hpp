#pragma once

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#define ATP_X86 1
#else
#define ATP_X86 0
#endif

namespace atp::kernels {

// Dense row-major building blocks. Every kernel exists as a scalar reference
// implementation and, on x86-64, as an AVX2+FMA variant. Dispatched entry
// points pick the widest variant the CPU supports; the scalar path is the
// semantic reference and the two are equivalence-tested.
//
// Conventions:
//   matmul_nn(a, b, c, m, k, n):  c[m x n] = a[m x k] * b[k x n]
//   matmul_nt(a, b, c, m, k, n):  c[m x n] = a[m x k] * b[n x k]^T
//   matmul_tn(a, b, c, m, k, n):  c[m x n] = a[k x m]^T * b[k x n]
//   matvec   (a, x, y, m, n):     y[m] = a[m x n] * x[n]
//   matvec_t (a, x, y, m, n):     y[n] = a[m x n]^T * x[m]
//   rank1_sub(a, u, v, m, n):     a[m x n] -= u[m] * v[n]^T
// Output buffers are overwritten and must not alias inputs.

namespace scalar {

template <typename T> T dot(const T *x, const T *y, std::size_t n);
template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n);
template <typename T> void scale(T alpha, T *x, std::size_t n);
template <typename T> void add(const T *x, const T *y, T *out, std::size_t n);
template <typename T> void sub(const T *x, const T *y, T *out, std::size_t n);
template <typename T>
void matmul_nn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_nt(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_tn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matvec(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void matvec_t(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void rank1_sub(T *a, const T *u, const T *v, std::size_t m, std::size_t n);
template <typename T>
void colsum(const T *a, T *out, std::size_t m, std::size_t n);
// In-place, numerically safe softmax (max subtraction before exp).
template <typename T> void softmax_row(T *x, std::size_t n);

} // namespace scalar

#if ATP_X86
namespace avx2 {

template <typename T> T dot(const T *x, const T *y, std::size_t n);
template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n);
template <typename T> void scale(T alpha, T *x, std::size_t n);
template <typename T> void add(const T *x, const T *y, T *out, std::size_t n);
template <typename T> void sub(const T *x, const T *y, T *out, std::size_t n);
template <typename T>
void matmul_nn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_nt(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_tn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matvec(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void matvec_t(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void rank1_sub(T *a, const T *u, const T *v, std::size_t m, std::size_t n);
template <typename T>
void colsum(const T *a, T *out, std::size_t m, std::size_t n);
template <typename T> void softmax_row(T *x, std::size_t n);

} // namespace avx2
#endif

bool cpu_has_avx2();
// "avx2" or "scalar", after force_scalar and CPU detection.
const char *active_isa();
// Pin dispatch to the scalar reference path (tests, --no-simd).
void force_scalar(bool on);

// Dispatched entry points.
template <typename T> T dot(const T *x, const T *y, std::size_t n);
template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n);
template <typename T> void scale(T alpha, T *x, std::size_t n);
template <typename T> void add(const T *x, const T *y, T *out, std::size_t n);
template <typename T> void sub(const T *x, const T *y, T *out, std::size_t n);
template <typename T>
void matmul_nn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_nt(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_tn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matvec(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void matvec_t(const T *a, const T *x, T *y, std::size_t m, std::size_t n);
template <typename T>
void rank1_sub(T *a, const T *u, const T *v, std::size_t m, std::size_t n);
template <typename T>
void colsum(const T *a, T *out, std::size_t m, std::size_t n);
template <typename T> void softmax_row(T *x, std::size_t n);

} // namespace atp::kernels
