#include "pcm/core.hpp"

#include <algorithm>
#include <cmath>

#include "pcm/kernels.hpp"

namespace pcm {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw DimensionError("Mat: data length " + std::to_string(data_.size()) + " != " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vec matvec(const Mat& m, std::span<const double> v) {
    if (m.cols() != v.size())
        throw DimensionError("matvec: matrix has " + std::to_string(m.cols()) +
                             " columns, vector has " + std::to_string(v.size()) + " entries");
    Vec out(m.rows());
    kernels::active().matvec(m.rows(), m.cols(), m.data().data(), v.data(), out.data());
    return out;
}

Vec matvec_transposed(const Mat& m, std::span<const double> v) {
    if (m.rows() != v.size())
        throw DimensionError("matvec_transposed: matrix has " + std::to_string(m.rows()) +
                             " rows, vector has " + std::to_string(v.size()) + " entries");
    Vec out(m.cols());
    kernels::active().matvec_t(m.rows(), m.cols(), m.data().data(), v.data(), out.data());
    return out;
}

Norms norms(std::span<const double> v) { return {l2(v), linf(v)}; }

double l2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double linf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Vec axpy(double a, std::span<const double> x, std::span<const double> y) {
    Vec out(y.begin(), y.end());
    axpy_inplace(a, x, out);
    return out;
}

void axpy_inplace(double a, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size())
        throw DimensionError("axpy: length " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    kernels::active().axpy(x.size(), a, x.data(), y.data());
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SeededRng::normal() { return normal_(engine_); }

double SeededRng::uniform() { return uniform_(engine_); }

std::size_t SeededRng::uniform_index(std::size_t count) {
    if (count == 0) throw std::invalid_argument("uniform_index: empty range");
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(engine_);
}

Vec gaussian(SeededRng& rng, std::size_t n) {
    Vec out(n);
    for (double& x : out) x = rng.normal();
    return out;
}

}  // namespace pcm
