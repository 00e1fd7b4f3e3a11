#pragma once

// Dense numerics and deterministic randomness shared by every module.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcm {

// ---------------------------------------------------------------------------
// Error classes. Each maps to a distinct CLI exit code (see tools/pcm_cli.cpp).
// ---------------------------------------------------------------------------

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, truncation or checksum mismatch.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values during an iterative computation.
struct NumericError : std::runtime_error {
    NumericError(const std::string& what, std::size_t iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration(iteration) {}
    std::size_t iteration;
};

using Vec = std::vector<double>;

/// Row-major dense matrix.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    bool operator==(const Mat&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Vec matvec(const Mat& m, std::span<const double> v);
/// m^T * v
Vec matvec_transposed(const Mat& m, std::span<const double> v);

struct Norms {
    double l2;
    double linf;
};

Norms norms(std::span<const double> v);
double l2(std::span<const double> v);
double linf(std::span<const double> v);

/// y + a*x
Vec axpy(double a, std::span<const double> x, std::span<const double> y);
/// y += a*x in place
void axpy_inplace(double a, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> v);

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Single-owner deterministic generator (mt19937_64 state).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double normal();
    double uniform();  // [0, 1)
    std::size_t uniform_index(std::size_t count);  // {0, ..., count-1}

    /// Deterministic child generator for parallel work item `index`.
    SeededRng child(std::uint64_t index) const { return SeededRng(mix_seed(seed_, index)); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Vec gaussian(SeededRng& rng, std::size_t n);

}  // namespace pcm
