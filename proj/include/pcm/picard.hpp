#pragma once

// Fixed-point iteration X^{k+1} = Phi(X^k) with convergence diagnostics.

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pcm/solver.hpp"

namespace pcm {

enum class ErrorMetric { final_point_l2, trajectory_mean_l2 };

std::string to_string(ErrorMetric metric);
ErrorMetric parse_error_metric(const std::string& name);

struct PicardConfig {
    std::size_t max_iters = 50;
    /// Stop once max_t |X^{k+1}_t - X^k_t|_inf < tol, or the sweep reproduced
    /// its input exactly. tol = 0 stops only at an exact fixed point.
    double tol = 1e-4;
    ErrorMetric metric = ErrorMetric::final_point_l2;
    bool keep_iterates = false;
    std::size_t threads = 0;

    void validate() const;
};

struct PicardRunReport {
    std::vector<double> residuals;  // residuals[k-1] = |X^k - X^{k-1}|, per-point L-inf
    std::vector<double> errors;     // errors[k-1] = error of X^k to the reference (if given)
    std::vector<Trajectory> iterates;  // X^0..X^k when keep_iterates
    std::size_t iterations = 0;
    /// Sweeps of the network over a full trajectory (2 per iteration when two
    /// models are mixed in output space).
    std::size_t sweeps = 0;
    bool converged = false;
    double seconds = 0.0;
    Trajectory final;
};

/// Per-point L-inf distance max_t |a_t - b_t|_inf.
double residual_linf(const Trajectory& a, const Trajectory& b);

/// final-point-l2: |a_T - b_T|_2. trajectory-mean-l2: mean over t = 1..T of
/// |a_t - b_t|_2. Throws DimensionError on shape mismatch.
double convergence_error(const Trajectory& X, const Trajectory& ref, ErrorMetric metric);

/// First k (1-based) with errors[k-1] <= eps, or nullopt.
std::optional<std::size_t> iterations_to(const std::vector<double>& errors, double eps);

PicardRunReport run_picard(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                           const PicardConfig& cfg, const Trajectory* reference = nullptr);

/// True iff after k sweeps from the constant trajectory, points 0..k match
/// sequential_sample within tol (L-inf).
bool prefix_exactness(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                      std::size_t k, double tol = 1e-10);

namespace detail {

/// One fixed-point iteration: (k, X^k) -> (X^{k+1}, sweeps spent).
using SweepFn = std::function<std::pair<Trajectory, std::size_t>(std::size_t, const Trajectory&)>;
/// Whether a residual below tol may end the run at iteration k.
using StopGate = std::function<bool(std::size_t)>;

/// Shared iteration driver for Picard, model-switching and Newton runs.
PicardRunReport iterate(const Vec& x0, std::size_t steps, const PicardConfig& cfg,
                        const Trajectory* reference, const SweepFn& sweep,
                        const StopGate& may_stop);

}  // namespace detail
}  // namespace pcm
