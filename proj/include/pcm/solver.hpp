#pragma once

// Discrete deterministic sampler expressed as additive increments, the
// parallel sweep operator over a whole trajectory, and the sequential
// ground-truth sampler.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcm/core.hpp"
#include "pcm/denoiser.hpp"

namespace pcm {

enum class SolverKind : std::uint32_t { euler_eq10 = 0, ddim = 1 };

std::string to_string(SolverKind kind);
/// "euler-eq10" or "ddim"; ConfigError otherwise.
SolverKind parse_solver_kind(const std::string& name);

/// One-step update x_{t+1} = carry(t) * x + gain(t) * eps_hat(x, t).
///
/// euler-eq10: carry = 1, gain = 1/T, so the increment is eps_hat / T.
/// ddim: the deterministic DDIM update between alpha(t) and alpha(t+1)
/// rewritten in terms of the noise estimate. At alpha(t) = 0 the clean-data
/// estimate is taken to be the origin (the toy sets are centred), which is
/// the alpha -> 0 limit of the usual formula.
class StepFn {
public:
    static StepFn euler(std::size_t steps);
    static StepFn ddim(const NoiseSchedule& schedule);
    static StepFn make(SolverKind kind, const NoiseSchedule& schedule);

    SolverKind kind() const { return kind_; }
    std::size_t steps() const { return carry_.size(); }
    double carry(std::size_t t) const { return carry_.at(t); }
    double gain(std::size_t t) const { return gain_.at(t); }

private:
    StepFn(SolverKind kind, Vec carry, Vec gain)
        : kind_(kind), carry_(std::move(carry)), gain_(std::move(gain)) {}

    SolverKind kind_;
    Vec carry_;
    Vec gain_;
};

/// T+1 states; points[0] is the initial noise and is never changed by a sweep.
struct Trajectory {
    std::vector<Vec> points;

    static Trajectory constant(const Vec& x0, std::size_t steps);

    std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
    std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
    const Vec& initial() const { return points.front(); }
    const Vec& last() const { return points.back(); }

    bool all_finite() const;
    bool operator==(const Trajectory&) const = default;
};

/// Amount added when advancing from step t to t+1 from state x.
Vec increment(const StepFn& step, const DenoiserParams& params, std::span<const double> x,
              std::size_t t);

/// (d increment / dx) * v
Vec increment_jvp(const StepFn& step, const DenoiserParams& params, std::span<const double> x,
                  std::size_t t, std::span<const double> v);

/// out[0] = X[0]; out[t+1] = out[t] + increment(X[t], t).
/// The T increments are evaluated concurrently on `threads` workers (0 = the
/// process default); the prefix sum runs in ascending t, so the result does
/// not depend on the worker count.
Trajectory phi_sweep(const StepFn& step, const DenoiserParams& params, const Trajectory& X,
                     std::size_t threads = 0);

Trajectory sequential_sample(const StepFn& step, const DenoiserParams& params, const Vec& x0);

/// Throws DimensionError unless step, params and (optionally) the trajectory
/// agree on T and n.
void check_compatible(const StepFn& step, const DenoiserParams& params);
void check_compatible(const StepFn& step, const DenoiserParams& params, const Trajectory& X);

}  // namespace pcm
