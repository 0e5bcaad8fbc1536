#include "blbf/kernels.hpp"

namespace blbf::kern {

namespace {

// Reference reduction order: four stride-4 lane accumulators, combined
// (l0+l1)+(l2+l3), tail summed sequentially and added last. The AVX2 dot
// reproduces this exactly.
double dot_scalar(const double* x, const double* y, std::size_t n) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 += x[i] * y[i];
        l1 += x[i + 1] * y[i + 1];
        l2 += x[i + 2] * y[i + 2];
        l3 += x[i + 3] * y[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return ((l0 + l1) + (l2 + l3)) + tail;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void vscale_add_scalar(double* v, double mu, double c, const double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = mu * v[i] + c * g[i];
}

void vadd_scalar(double* w, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] += v[i];
}

}  // namespace

const KernelTable kScalar = {"scalar", dot_scalar, axpy_scalar, vscale_add_scalar,
                             vadd_scalar};

void gemv(const double* W, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(W + r * cols, x, cols);
}

void rank1_update(double* W, std::size_t rows, std::size_t cols, double alpha,
                  const double* u, const double* v) {
    for (std::size_t r = 0; r < rows; ++r) axpy(W + r * cols, alpha * u[r], v, cols);
}

void gemv_transposed(const double* W, std::size_t rows, std::size_t cols,
                     const double* d, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy(y, d[r], W + r * cols, cols);
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace blbf::kern
