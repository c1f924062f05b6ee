#include "atp/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace atp::kernels::scalar {

template <typename T> T dot(const T *x, const T *y, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T> void scale(T alpha, T *x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T> void add(const T *x, const T *y, T *out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <typename T> void sub(const T *x, const T *y, T *out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

template <typename T>
void matmul_nn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    // ikj order: streams b and c rows, a[i*k+p] stays in register.
    for (std::size_t i = 0; i < m; ++i) {
        T *crow = c + i * n;
        std::fill(crow, crow + n, T(0));
        for (std::size_t p = 0; p < k; ++p) {
            const T aval = a[i * k + p];
            const T *brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
}

template <typename T>
void matmul_nt(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T *arow = a + i * k;
        T *crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = dot(arow, b + j * k, k);
    }
}

template <typename T>
void matmul_tn(const T *a, const T *b, T *c, std::size_t m, std::size_t k, std::size_t n) {
    std::fill(c, c + m * n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
        const T *arow = a + p * m;
        const T *brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T aval = arow[i];
            T *crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
}

template <typename T>
void matvec(const T *a, const T *x, T *y, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot(a + i * n, x, n);
}

template <typename T>
void matvec_t(const T *a, const T *x, T *y, std::size_t m, std::size_t n) {
    std::fill(y, y + n, T(0));
    for (std::size_t i = 0; i < m; ++i) axpy(x[i], a + i * n, y, n);
}

template <typename T>
void rank1_sub(T *a, const T *u, const T *v, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) axpy(-u[i], v, a + i * n, n);
}

template <typename T>
void colsum(const T *a, T *out, std::size_t m, std::size_t n) {
    std::fill(out, out + n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        const T *arow = a + i * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += arow[j];
    }
}

template <typename T> void softmax_row(T *x, std::size_t n) {
    T mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    T sum = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    scale(T(1) / sum, x, n);
}

#define ATP_INSTANTIATE_SCALAR(T)                                                        \
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

ATP_INSTANTIATE_SCALAR(float)
ATP_INSTANTIATE_SCALAR(double)

#undef ATP_INSTANTIATE_SCALAR

} // namespace atp::kernels::scalar
