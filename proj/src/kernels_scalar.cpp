#include "pcm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace pcm::kernels {
namespace {

void matvec_scalar(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void matvec_t_scalar(std::size_t rows, std::size_t cols, const double* m, const double* x,
                     double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m + r * cols;
        const double xr = x[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void outer_acc_scalar(std::size_t rows, std::size_t cols, const double* u, const double* v,
                      double* m) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = m + r * cols;
        const double ur = u[r];
        for (std::size_t c = 0; c < cols; ++c) row[c] += ur * v[c];
    }
}

const KernelTable kScalar{"scalar", matvec_scalar, matvec_t_scalar, axpy_scalar,
                          outer_acc_scalar};

const KernelTable* pick_default() {
    if (const char* env = std::getenv("PCM_SIMD"); env && std::string_view(env) == "scalar")
        return &kScalar;
    if (const KernelTable* t = avx2()) return t;
    return &kScalar;
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{pick_default()};
    return slot;
}

}  // namespace

const KernelTable& scalar() { return kScalar; }

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) {
    active_slot().store(&table, std::memory_order_release);
}

}  // namespace pcm::kernels
