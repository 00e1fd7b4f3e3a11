#include "pcm/picard.hpp"

#include <algorithm>
#include <cmath>

namespace pcm {

std::string to_string(ErrorMetric metric) {
    return metric == ErrorMetric::final_point_l2 ? "final-point-l2" : "trajectory-mean-l2";
}

ErrorMetric parse_error_metric(const std::string& name) {
    if (name == "final-point-l2") return ErrorMetric::final_point_l2;
    if (name == "trajectory-mean-l2") return ErrorMetric::trajectory_mean_l2;
    throw ConfigError("unknown error metric '" + name + "'");
}

void PicardConfig::validate() const {
    if (max_iters < 1) throw ConfigError("PicardConfig: max_iters must be >= 1");
    if (!(tol >= 0.0)) throw ConfigError("PicardConfig: tol must be >= 0");
}

namespace {
void check_same_shape(const Trajectory& a, const Trajectory& b) {
    if (a.points.size() != b.points.size() || a.dim() != b.dim())
        throw DimensionError("trajectories differ in shape");
}
}  // namespace

double residual_linf(const Trajectory& a, const Trajectory& b) {
    check_same_shape(a, b);
    double m = 0.0;
    for (std::size_t t = 0; t < a.points.size(); ++t)
        for (std::size_t i = 0; i < a.points[t].size(); ++i)
            m = std::max(m, std::abs(a.points[t][i] - b.points[t][i]));
    return m;
}

double convergence_error(const Trajectory& X, const Trajectory& ref, ErrorMetric metric) {
    check_same_shape(X, ref);
    auto dist = [](const Vec& a, const Vec& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(acc);
    };
    if (metric == ErrorMetric::final_point_l2) return dist(X.last(), ref.last());
    const std::size_t T = X.steps();
    if (T == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t t = 1; t <= T; ++t) acc += dist(X.points[t], ref.points[t]);
    return acc / static_cast<double>(T);
}

std::optional<std::size_t> iterations_to(const std::vector<double>& errors, double eps) {
    for (std::size_t k = 0; k < errors.size(); ++k)
        if (errors[k] <= eps) return k + 1;
    return std::nullopt;
}

namespace detail {

PicardRunReport iterate(const Vec& x0, std::size_t steps, const PicardConfig& cfg,
                        const Trajectory* reference, const SweepFn& sweep,
                        const StopGate& may_stop) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    PicardRunReport rep;
    Trajectory X = Trajectory::constant(x0, steps);
    if (reference) check_same_shape(X, *reference);
    if (cfg.keep_iterates) rep.iterates.push_back(X);

    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        auto [next, sweeps] = sweep(k, X);
        rep.sweeps += sweeps;
        if (!next.all_finite()) throw NumericError("non-finite trajectory", k + 1);
        const double res = residual_linf(next, X);
        rep.residuals.push_back(res);
        if (reference) rep.errors.push_back(convergence_error(next, *reference, cfg.metric));
        X = std::move(next);
        if (cfg.keep_iterates) rep.iterates.push_back(X);
        rep.iterations = k + 1;
        if ((res < cfg.tol || res == 0.0) && may_stop(k)) {
            rep.converged = true;
            break;
        }
    }
    rep.final = std::move(X);
    rep.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace detail

PicardRunReport run_picard(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                           const PicardConfig& cfg, const Trajectory* reference) {
    check_compatible(step, params);
    return detail::iterate(
        x0, step.steps(), cfg, reference,
        [&](std::size_t, const Trajectory& X) {
            return std::pair{phi_sweep(step, params, X, cfg.threads), std::size_t{1}};
        },
        [](std::size_t) { return true; });
}

bool prefix_exactness(const StepFn& step, const DenoiserParams& params, const Vec& x0,
                      std::size_t k, double tol) {
    if (k > step.steps()) throw std::out_of_range("prefix_exactness: k > T");
    const Trajectory seq = sequential_sample(step, params, x0);
    Trajectory X = Trajectory::constant(x0, step.steps());
    for (std::size_t i = 0; i < k; ++i) X = phi_sweep(step, params, X);
    for (std::size_t t = 0; t <= k; ++t)
        for (std::size_t j = 0; j < x0.size(); ++j)
            if (!(std::abs(X.points[t][j] - seq.points[t][j]) <= tol)) return false;
    return true;
}

}  // namespace pcm
