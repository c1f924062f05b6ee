#include "atp/kernels.hpp"

#if ATP_X86

#include <algorithm>
#include <cmath>
#include <immintrin.h>

namespace atp::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

} // namespace

// ---------------------------------------------------------------- double ----

template <> double dot<double>(const double *x, const double *y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <> void axpy<double>(double alpha, const double *x, double *y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <> void scale<double>(double alpha, double *x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

template <> void add<double>(const double *x, const double *y, double *out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

template <> void sub<double>(const double *x, const double *y, double *out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] - y[i];
}

namespace {

// crow += aval * brow, the shared inner step of nn/tn/rank1 updates.
inline void fma_row(double aval, const double *brow, double *crow, std::size_t n) {
    const __m256d va = _mm256_set1_pd(aval);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
        _mm256_storeu_pd(crow + j + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j + 4),
                                                       _mm256_loadu_pd(crow + j + 4)));
    }
    for (; j + 4 <= n; j += 4)
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
    for (; j < n; ++j) crow[j] += aval * brow[j];
}

inline void fma_row(float aval, const float *brow, float *crow, std::size_t n) {
    const __m256 va = _mm256_set1_ps(aval);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8)
        _mm256_storeu_ps(crow + j,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), _mm256_loadu_ps(crow + j)));
    for (; j < n; ++j) crow[j] += aval * brow[j];
}

} // namespace

template <>
void matmul_nn<double>(const double *a, const double *b, double *c, std::size_t m,
                       std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double *crow = c + i * n;
        std::fill(crow, crow + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) fma_row(a[i * k + p], b + p * n, crow, n);
    }
}

template <>
void matmul_nt<double>(const double *a, const double *b, double *c, std::size_t m,
                       std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double *arow = a + i * k;
        double *crow = c + i * n;
        std::size_t j = 0;
        // Two b rows per pass share the a-row loads.
        for (; j + 2 <= n; j += 2) {
            const double *b0 = b + j * k;
            const double *b1 = b + (j + 1) * k;
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const __m256d av = _mm256_loadu_pd(arow + p);
                acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), acc0);
                acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), acc1);
            }
            double s0 = hsum(acc0), s1 = hsum(acc1);
            for (; p < k; ++p) {
                s0 += arow[p] * b0[p];
                s1 += arow[p] * b1[p];
            }
            crow[j] = s0;
            crow[j + 1] = s1;
        }
        for (; j < n; ++j) crow[j] = dot<double>(arow, b + j * k, k);
    }
}

template <>
void matmul_tn<double>(const double *a, const double *b, double *c, std::size_t m,
                       std::size_t k, std::size_t n) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double *arow = a + p * m;
        const double *brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) fma_row(arow[i], brow, c + i * n, n);
    }
}

template <>
void matvec<double>(const double *a, const double *x, double *y, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot<double>(a + i * n, x, n);
}

template <>
void matvec_t<double>(const double *a, const double *x, double *y, std::size_t m, std::size_t n) {
    std::fill(y, y + n, 0.0);
    for (std::size_t i = 0; i < m; ++i) fma_row(x[i], a + i * n, y, n);
}

template <>
void rank1_sub<double>(double *a, const double *u, const double *v, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) fma_row(-u[i], v, a + i * n, n);
}

template <>
void colsum<double>(const double *a, double *out, std::size_t m, std::size_t n) {
    std::fill(out, out + n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double *arow = a + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4)
            _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j), _mm256_loadu_pd(arow + j)));
        for (; j < n; ++j) out[j] += arow[j];
    }
}

template <> void softmax_row<double>(double *x, std::size_t n) {
    __m256d vmax = _mm256_set1_pd(x[0]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
    double mx = std::max(std::max(vmax[0], vmax[1]), std::max(vmax[2], vmax[3]));
    for (; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = std::exp(x[t] - mx);
        sum += x[t];
    }
    scale<double>(1.0 / sum, x, n);
}

// ----------------------------------------------------------------- float ----

template <> float dot<float>(const float *x, const float *y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    float acc = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <> void axpy<float>(float alpha, const float *x, float *y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <> void scale<float>(float alpha, float *x, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

template <> void add<float>(const float *x, const float *y, float *out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

template <> void sub<float>(const float *x, const float *y, float *out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) out[i] = x[i] - y[i];
}

template <>
void matmul_nn<float>(const float *a, const float *b, float *c, std::size_t m,
                      std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        float *crow = c + i * n;
        std::fill(crow, crow + n, 0.0f);
        for (std::size_t p = 0; p < k; ++p) fma_row(a[i * k + p], b + p * n, crow, n);
    }
}

template <>
void matmul_nt<float>(const float *a, const float *b, float *c, std::size_t m,
                      std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const float *arow = a + i * k;
        float *crow = c + i * n;
        std::size_t j = 0;
        for (; j + 2 <= n; j += 2) {
            const float *b0 = b + j * k;
            const float *b1 = b + (j + 1) * k;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            std::size_t p = 0;
            for (; p + 8 <= k; p += 8) {
                const __m256 av = _mm256_loadu_ps(arow + p);
                acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), acc0);
                acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), acc1);
            }
            float s0 = hsum(acc0), s1 = hsum(acc1);
            for (; p < k; ++p) {
                s0 += arow[p] * b0[p];
                s1 += arow[p] * b1[p];
            }
            crow[j] = s0;
            crow[j + 1] = s1;
        }
        for (; j < n; ++j) crow[j] = dot<float>(arow, b + j * k, k);
    }
}

template <>
void matmul_tn<float>(const float *a, const float *b, float *c, std::size_t m,
                      std::size_t k, std::size_t n) {
    std::fill(c, c + m * n, 0.0f);
    for (std::size_t p = 0; p < k; ++p) {
        const float *arow = a + p * m;
        const float *brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) fma_row(arow[i], brow, c + i * n, n);
    }
}

template <>
void matvec<float>(const float *a, const float *x, float *y, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot<float>(a + i * n, x, n);
}

template <>
void matvec_t<float>(const float *a, const float *x, float *y, std::size_t m, std::size_t n) {
    std::fill(y, y + n, 0.0f);
    for (std::size_t i = 0; i < m; ++i) fma_row(x[i], a + i * n, y, n);
}

template <>
void rank1_sub<float>(float *a, const float *u, const float *v, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) fma_row(-u[i], v, a + i * n, n);
}

template <>
void colsum<float>(const float *a, float *out, std::size_t m, std::size_t n) {
    std::fill(out, out + n, 0.0f);
    for (std::size_t i = 0; i < m; ++i) {
        const float *arow = a + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8)
            _mm256_storeu_ps(out + j, _mm256_add_ps(_mm256_loadu_ps(out + j), _mm256_loadu_ps(arow + j)));
        for (; j < n; ++j) out[j] += arow[j];
    }
}

template <> void softmax_row<float>(float *x, std::size_t n) {
    __m256 vmax = _mm256_set1_ps(x[0]);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(x + i));
    float mx = x[0];
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, vmax);
    for (float lane : lanes) mx = std::max(mx, lane);
    for (; i < n; ++i) mx = std::max(mx, x[i]);
    float sum = 0.0f;
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = std::exp(x[t] - mx);
        sum += x[t];
    }
    scale<float>(1.0f / sum, x, n);
}

} // namespace atp::kernels::avx2

#endif // ATP_X86
