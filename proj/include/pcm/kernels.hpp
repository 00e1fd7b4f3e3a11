#pragma once

// Inner-loop kernels with a scalar reference and SIMD variants chosen at
// runtime. Every variant must be bit-identical to the scalar reference:
// vector lanes run independent accumulations in the same order the scalar
// loop uses, and floating-point contraction is disabled for the whole build.

#include <cstddef>
#include <string_view>

namespace pcm::kernels {

struct KernelTable {
    std::string_view name;

    /// y[r] = sum_c m[r*cols + c] * x[c], accumulated in ascending c.
    void (*matvec)(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* y);
    /// y[c] = sum_r m[r*cols + c] * x[r], accumulated in ascending r.
    void (*matvec_t)(std::size_t rows, std::size_t cols, const double* m, const double* x,
                     double* y);
    /// y[i] += a * x[i]
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    /// m[r*cols + c] += u[r] * v[c]
    void (*outer_acc)(std::size_t rows, std::size_t cols, const double* u, const double* v,
                      double* m);
};

const KernelTable& scalar();

/// nullptr when the build or the host CPU lacks AVX2.
const KernelTable* avx2();

/// Variant in use. Picks the widest supported variant on first call; the
/// environment variable PCM_SIMD=scalar forces the reference kernels.
const KernelTable& active();

/// Overrides the active table (tests and benchmarks).
void set_active(const KernelTable& table);

}  // namespace pcm::kernels
