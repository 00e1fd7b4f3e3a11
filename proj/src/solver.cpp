#include "pcm/solver.hpp"

#include <cmath>

#include "pcm/parallel.hpp"

namespace pcm {

std::string to_string(SolverKind kind) {
    return kind == SolverKind::ddim ? "ddim" : "euler-eq10";
}

SolverKind parse_solver_kind(const std::string& name) {
    if (name == "ddim") return SolverKind::ddim;
    if (name == "euler-eq10") return SolverKind::euler_eq10;
    throw ConfigError("unknown solver '" + name + "'");
}

StepFn StepFn::euler(std::size_t steps) {
    if (steps == 0) throw std::invalid_argument("StepFn: T must be >= 1");
    return StepFn(SolverKind::euler_eq10, Vec(steps, 1.0),
                  Vec(steps, 1.0 / static_cast<double>(steps)));
}

StepFn StepFn::ddim(const NoiseSchedule& schedule) {
    const std::size_t T = schedule.steps();
    if (T == 0) throw std::invalid_argument("StepFn: empty schedule");
    Vec carry(T), gain(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double a = schedule.alpha(t);
        const double a_next = schedule.alpha(t + 1);
        if (a == 0.0) {
            carry[t] = 0.0;
            gain[t] = std::sqrt(1.0 - a_next);
        } else {
            carry[t] = std::sqrt(a_next / a);
            gain[t] = std::sqrt(1.0 - a_next) - std::sqrt(a_next * (1.0 - a) / a);
        }
    }
    return StepFn(SolverKind::ddim, std::move(carry), std::move(gain));
}

StepFn StepFn::make(SolverKind kind, const NoiseSchedule& schedule) {
    return kind == SolverKind::ddim ? ddim(schedule) : euler(schedule.steps());
}

Trajectory Trajectory::constant(const Vec& x0, std::size_t steps) {
    return Trajectory{std::vector<Vec>(steps + 1, x0)};
}

bool Trajectory::all_finite() const {
    for (const auto& p : points)
        if (!pcm::all_finite(p)) return false;
    return true;
}

void check_compatible(const StepFn& step, const DenoiserParams& params) {
    if (step.steps() != params.steps())
        throw DimensionError("solver has T=" + std::to_string(step.steps()) + ", model has T=" +
                             std::to_string(params.steps()));
}

void check_compatible(const StepFn& step, const DenoiserParams& params, const Trajectory& X) {
    check_compatible(step, params);
    if (X.steps() != step.steps())
        throw DimensionError("trajectory has T=" + std::to_string(X.steps()) +
                             ", solver has T=" + std::to_string(step.steps()));
    for (const auto& p : X.points)
        if (p.size() != params.state_dim) throw DimensionError("trajectory state dim mismatch");
}

Vec increment(const StepFn& step, const DenoiserParams& params, std::span<const double> x,
              std::size_t t) {
    Vec eps = predict(params, x, t);
    if (step.kind() == SolverKind::euler_eq10) {
        const double T = static_cast<double>(step.steps());
        for (double& e : eps) e /= T;
        return eps;
    }
    const double c = step.carry(t) - 1.0;
    const double g = step.gain(t);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = c * x[i] + g * eps[i];
    return eps;
}

Vec increment_jvp(const StepFn& step, const DenoiserParams& params, std::span<const double> x,
                  std::size_t t, std::span<const double> v) {
    Vec d = jvp(params, x, t, v);
    if (step.kind() == SolverKind::euler_eq10) {
        const double T = static_cast<double>(step.steps());
        for (double& e : d) e /= T;
        return d;
    }
    const double c = step.carry(t) - 1.0;
    const double g = step.gain(t);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = c * v[i] + g * d[i];
    return d;
}

Trajectory phi_sweep(const StepFn& step, const DenoiserParams& params, const Trajectory& X,
                     std::size_t threads) {
    check_compatible(step, params, X);
    const std::size_t T = X.steps();
    std::vector<Vec> inc(T);
    parallel_for(T, threads, [&](std::size_t t) { inc[t] = increment(step, params, X.points[t], t); });

    Trajectory out;
    out.points.reserve(T + 1);
    out.points.push_back(X.points[0]);
    for (std::size_t t = 0; t < T; ++t) {
        Vec next = out.points[t];
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += inc[t][i];
        out.points.push_back(std::move(next));
    }
    return out;
}

Trajectory sequential_sample(const StepFn& step, const DenoiserParams& params, const Vec& x0) {
    check_compatible(step, params);
    if (x0.size() != params.state_dim) throw DimensionError("sequential_sample: x0 dim mismatch");
    const std::size_t T = step.steps();
    Trajectory out;
    out.points.reserve(T + 1);
    out.points.push_back(x0);
    for (std::size_t t = 0; t < T; ++t) {
        const Vec inc = increment(step, params, out.points[t], t);
        Vec next = out.points[t];
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += inc[i];
        out.points.push_back(std::move(next));
    }
    return out;
}

}  // namespace pcm
