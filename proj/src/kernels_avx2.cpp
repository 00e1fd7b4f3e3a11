// Compiled with -mavx2 (never -mfma): each lane reproduces the scalar
// multiply-then-add sequence exactly.

#include "pcm/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace pcm::kernels {

#if defined(__AVX2__)
namespace {

// Four rows per pass; the column loop stays sequential so every lane
// accumulates in the same order as the scalar reference.
void matvec_avx2(std::size_t rows, std::size_t cols, const double* m, const double* x,
                 double* y) {
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
        const double* r0 = m + (r + 0) * cols;
        const double* r1 = m + (r + 1) * cols;
        const double* r2 = m + (r + 2) * cols;
        const double* r3 = m + (r + 3) * cols;
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t c = 0; c < cols; ++c) {
            const __m256d w = _mm256_set_pd(r3[c], r2[c], r1[c], r0[c]);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_set1_pd(x[c])));
        }
        _mm256_storeu_pd(y + r, acc);
    }
    for (; r < rows; ++r) {
        const double* row = m + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void matvec_t_avx2(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* y) {
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t r = 0; r < rows; ++r) {
            const __m256d w = _mm256_loadu_pd(m + r * cols + c);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_set1_pd(x[r])));
        }
        _mm256_storeu_pd(y + c, acc);
    }
    for (; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += m[r * cols + c] * x[r];
        y[c] = acc;
    }
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void outer_acc_avx2(std::size_t rows, std::size_t cols, const double* u, const double* v,
                    double* m) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = m + r * cols;
        const __m256d ur = _mm256_set1_pd(u[r]);
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d prod = _mm256_mul_pd(ur, _mm256_loadu_pd(v + c));
            _mm256_storeu_pd(row + c, _mm256_add_pd(_mm256_loadu_pd(row + c), prod));
        }
        for (; c < cols; ++c) row[c] += u[r] * v[c];
    }
}

const KernelTable kAvx2{"avx2", matvec_avx2, matvec_t_avx2, axpy_avx2, outer_acc_avx2};

}  // namespace

const KernelTable* avx2() {
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2() { return nullptr; }

#endif

}  // namespace pcm::kernels
