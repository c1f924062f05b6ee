#include "atp/kernels.hpp"

#include <atomic>

namespace atp::kernels {

bool cpu_has_avx2() {
#if ATP_X86
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {
std::atomic<bool> g_use_avx2{cpu_has_avx2()};
}

const char *active_isa() { return g_use_avx2.load(std::memory_order_relaxed) ? "avx2" : "scalar"; }

void force_scalar(bool on) {
    g_use_avx2.store(!on && cpu_has_avx2(), std::memory_order_relaxed);
}

#if ATP_X86
#define ATP_DISPATCH(call)                                                               \
    if (g_use_avx2.load(std::memory_order_relaxed)) return avx2::call;                   \
    return scalar::call
#else
#define ATP_DISPATCH(call) return scalar::call
#endif

template <typename T> T dot(const T *x, const T *y, std::size_t n) {
    ATP_DISPATCH(dot(x, y, n));
}

template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n) {
    ATP_DISPATCH(axpy(alpha, x, y, n));
}

template <typename T> void scale(T alpha, T *x, std::size_t n) {
    ATP_DISPATCH(scale(alpha, x, n));
}

template <typename T> void add(const T *x, const T *y, T *out, std::size_t n) {
    ATP_DISPATCH(add(x, y, out, n));
}

template <typename T> void sub(const T *x, const T *y, T *out, std::size_t n) {
    ATP_DISPATCH(sub(x, y, out, n));
}

template <typename T>
void matmul_nn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    ATP_DISPATCH(matmul_nn(a, b, c, m, k, n));
}

template <typename T>
void matmul_nt(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    ATP_DISPATCH(matmul_nt(a, b, c, m, k, n));
}

template <typename T>
void matmul_tn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    ATP_DISPATCH(matmul_tn(a, b, c, m, k, n));
}

template <typename T>
void matvec(const T *a, const T *x, T *y, std::size_t m, std::size_t n) {
    ATP_DISPATCH(matvec(a, x, y, m, n));
}

template <typename T>
void matvec_t(const T *a, const T *x, T *y, std::size_t m, std::size_t n) {
    ATP_DISPATCH(matvec_t(a, x, y, m, n));
}

template <typename T>
void rank1_sub(T *a, const T *u, const T *v, std::size_t m, std::size_t n) {
    ATP_DISPATCH(rank1_sub(a, u, v, m, n));
}

template <typename T> void colsum(const T *a, T *out, std::size_t m, std::size_t n) {
    ATP_DISPATCH(colsum(a, out, m, n));
}

template <typename T> void softmax_row(T *x, std::size_t n) {
    ATP_DISPATCH(softmax_row(x, n));
}

#undef ATP_DISPATCH

#define ATP_INSTANTIATE_DISPATCH(T)                                                      \
    template T dot<T>(const T *, const T *, std::size_t);                                \
    template void axpy<T>(T, const T *, T *, std::size_t);                               \
    template void scale<T>(T, T *, std::size_t);                                         \
    template void add<T>(const T *, const T *, T *, std::size_t);                        \
    template void sub<T>(const T *, const T *, T *, std::size_t);                        \
    template void matmul_nn<T>(const T *, const T *, T *, std::size_t, std::size_t,      \
                               std::size_t);                                             \
    template void matmul_nt<T>(const T *, const T *, T *, std::size_t, std::size_t,      \
                               std::size_t);                                             \
    template void matmul_tn<T>(const T *, const T *, T *, std::size_t, std::size_t,      \
                               std::size_t);                                             \
    template void matvec<T>(const T *, const T *, T *, std::size_t, std::size_t);        \
    template void matvec_t<T>(const T *, const T *, T *, std::size_t, std::size_t);      \
    template void rank1_sub<T>(T *, const T *, const T *, std::size_t, std::size_t);     \
    template void colsum<T>(const T *, T *, std::size_t, std::size_t);                   \
    template void softmax_row<T>(T *, std::size_t);

ATP_INSTANTIATE_DISPATCH(float)
ATP_INSTANTIATE_DISPATCH(double)

#undef ATP_INSTANTIATE_DISPATCH

} // namespace atp::kernels
