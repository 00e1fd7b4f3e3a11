#include "pcm/newton.hpp"

#include <algorithm>

namespace pcm {

Trajectory newton_sweep(const StepFn& step, const DenoiserParams& params, const Trajectory& X,
                        std::size_t* aux_values) {
    check_compatible(step, params, X);
    const std::size_t T = X.steps();
    const std::size_t n = X.dim();

    Trajectory out;
    out.points.reserve(T + 1);
    out.points.push_back(X.points[0]);
    Vec delta(n);
    for (std::size_t t = 0; t < T; ++t) {
        const Vec& xt = X.points[t];
        // x'_{t+1} = x_t + inc + delta + dinc, summed from x'_t = x_t + delta.
        for (std::size_t i = 0; i < n; ++i) delta[i] = out.points[t][i] - xt[i];
        const Vec inc = increment(step, params, xt, t);
        const Vec dinc = increment_jvp(step, params, xt, t, delta);
        Vec next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = out.points[t][i] + (inc[i] + dinc[i]);
        if (!all_finite(next)) throw NumericError("newton_sweep: non-finite JVP step", t);
        out.points.push_back(std::move(next));
    }
    // Output trajectory plus delta, inc, dinc and next.
    if (aux_values) *aux_values = (T + 1) * n + 4 * n;
    return out;
}

NewtonReport run_newton(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                        const PicardConfig& cfg, const Trajectory* reference) {
    check_compatible(step, params);
    std::size_t peak = 0;
    PicardRunReport rep = detail::iterate(
        x0, step.steps(), cfg, reference,
        [&](std::size_t, const Trajectory& X) {
            std::size_t aux = 0;
            Trajectory next = newton_sweep(step, params, X, &aux);
            peak = std::max(peak, aux);
            return std::pair{std::move(next), std::size_t{1}};
        },
        [](std::size_t) { return true; });

    NewtonReport out;
    out.residuals = std::move(rep.residuals);
    out.errors = std::move(rep.errors);
    out.iterations = rep.iterations;
    out.converged = rep.converged;
    out.seconds = rep.seconds;
    out.final = std::move(rep.final);
    out.peak_aux_values = peak;

    const auto& track = out.errors.empty() ? out.residuals : out.errors;
    std::size_t rising = 0;
    for (std::size_t k = 1; k < track.size(); ++k) {
        rising = (track[k] > track[k - 1] && track[k] > track[0]) ? rising + 1 : 0;
        if (rising >= 3) {
            out.diverged = true;
            break;
        }
    }
    return out;
}

}  // namespace pcm
