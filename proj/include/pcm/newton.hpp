#pragma once

// Newton's method on Psi(X) = Phi(X) - X, emulated one timestep at a time
// with Jacobian-vector products. A convergence-speed comparator only: each
// sweep is sequential in t.

#include <cstddef>

#include "pcm/picard.hpp"

namespace pcm {

struct NewtonReport {
    std::vector<double> residuals;
    std::vector<double> errors;
    std::size_t iterations = 0;
    bool converged = false;
    /// Error (or residual, without a reference) rose for 3 consecutive
    /// iterations while above its first value.
    bool diverged = false;
    /// Largest number of doubles held by sweep-local buffers.
    std::size_t peak_aux_values = 0;
    double seconds = 0.0;
    Trajectory final;
};

/// x'_0 = x_0; x'_{t+1} = F_t(x_t) + dF_t(x_t) * (x'_t - x_t) for t = 0..T-1,
/// with F_t(x) = x + increment(x, t).
Trajectory newton_sweep(const StepFn& step, const DenoiserParams& params, const Trajectory& X,
                        std::size_t* aux_values = nullptr);

NewtonReport run_newton(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                        const PicardConfig& cfg, const Trajectory* reference = nullptr);

}  // namespace pcm
