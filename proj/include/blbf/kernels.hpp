#pragma once

#include <cstddef>
#include <string>

// Dense inner-loop kernels used by policy evaluation and training.
//
// The scalar reference kernels accumulate reductions in four independent
// lanes (stride-4 striping) and combine them pairwise, which is exactly the
// order a 4-wide vector unit produces. The AVX2 variants therefore return
// bit-identical results, and the whole library must be built with
// -ffp-contract=off so neither path silently fuses mul+add.
//
// Implementation is selected once at startup: AVX2 when the CPU supports it,
// scalar otherwise. BLBF_KERNELS=scalar|avx2 overrides the choice.

namespace blbf::kern {

struct KernelTable {
    const char* name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    // v = mu * v + c * g   (momentum update step)
    void (*vscale_add)(double* v, double mu, double c, const double* g, std::size_t n);
    void (*vadd)(double* w, const double* v, std::size_t n);
};

extern const KernelTable kScalar;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2;
#endif

/// Active implementation (dispatch decided on first use).
const KernelTable& active();

/// Force an implementation by name ("scalar" or "avx2"); throws if unavailable.
void force_impl(const std::string& name);

bool avx2_available();

inline double dot(const double* x, const double* y, std::size_t n) {
    return active().dot(x, y, n);
}
inline void axpy(double* y, double a, const double* x, std::size_t n) {
    active().axpy(y, a, x, n);
}
inline void vscale_add(double* v, double mu, double c, const double* g, std::size_t n) {
    active().vscale_add(v, mu, c, g, n);
}
inline void vadd(double* w, const double* v, std::size_t n) {
    active().vadd(w, v, n);
}

/// y = W x for row-major W (rows x cols); y must not alias W or x.
void gemv(const double* W, std::size_t rows, std::size_t cols, const double* x, double* y);

/// W += alpha * u v^T for row-major W (rows x cols).
void rank1_update(double* W, std::size_t rows, std::size_t cols, double alpha,
                  const double* u, const double* v);

/// y = W^T d for row-major W (rows x cols); y has cols entries and is overwritten.
void gemv_transposed(const double* W, std::size_t rows, std::size_t cols,
                     const double* d, double* y);

/// Order-stable reduction: recursive halving with a short sequential base
/// case. Permuting the inputs moves the result by at most O(n eps |v|).
double pairwise_sum(const double* v, std::size_t n);

}  // namespace blbf::kern
