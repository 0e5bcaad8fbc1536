#include "blbf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace blbf::kern {

namespace {

// Per-lane mul/add matches the scalar stride-4 accumulators; the horizontal
// combine repeats the scalar (l0+l1)+(l2+l3) order. No FMA.
double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d yv = _mm256_loadu_pd(y + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(xv, yv));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        __m256d xv = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void vscale_add_avx2(double* v, double mu, double c, const double* g, std::size_t n) {
    __m256d muv = _mm256_set1_pd(mu);
    __m256d cv = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vv = _mm256_loadu_pd(v + i);
        __m256d gv = _mm256_loadu_pd(g + i);
        _mm256_storeu_pd(v + i,
                         _mm256_add_pd(_mm256_mul_pd(muv, vv), _mm256_mul_pd(cv, gv)));
    }
    for (; i < n; ++i) v[i] = mu * v[i] + c * g[i];
}

void vadd_avx2(double* w, const double* v, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d wv = _mm256_loadu_pd(w + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        _mm256_storeu_pd(w + i, _mm256_add_pd(wv, vv));
    }
    for (; i < n; ++i) w[i] += v[i];
}

}  // namespace

const KernelTable kAvx2 = {"avx2", dot_avx2, axpy_avx2, vscale_add_avx2, vadd_avx2};

}  // namespace blbf::kern

#endif  // x86_64
