#include "pcm/switching.hpp"

#include <algorithm>

namespace pcm {

std::string to_string(SwitchMode mode) {
    switch (mode) {
        case SwitchMode::feature: return "feature";
        case SwitchMode::lora: return "lora";
        case SwitchMode::none: return "none";
    }
    return "?";
}

SwitchMode parse_switch_mode(const std::string& name) {
    if (name == "feature") return SwitchMode::feature;
    if (name == "lora") return SwitchMode::lora;
    if (name == "none") return SwitchMode::none;
    throw ConfigError("unknown switching mode '" + name + "'");
}

void SwitchConfig::validate() const {
    if (K < 1) throw ConfigError("SwitchConfig: K must be >= 1");
    if (!(stiffness >= 0.0)) throw ConfigError("SwitchConfig: stiffness must be >= 0");
}

double lambda_schedule(std::size_t k, std::size_t K, double stiffness) {
    const double v = 1.0 - stiffness * static_cast<double>(k) / static_cast<double>(K);
    return std::max(0.0, std::min(1.0, v));
}

Trajectory mixed_sweep_feature(const DenoiserParams& pcm, const DenoiserParams& base,
                               const StepFn& step, const Trajectory& X, double lambda,
                               std::size_t threads) {
    if (pcm.state_dim != base.state_dim || pcm.steps() != base.steps())
        throw DimensionError("mixed_sweep_feature: models differ in (n, T)");
    if (lambda == 1.0) return phi_sweep(step, pcm, X, threads);
    if (lambda == 0.0) return phi_sweep(step, base, X, threads);
    const Trajectory a = phi_sweep(step, pcm, X, threads);
    Trajectory out = phi_sweep(step, base, X, threads);
    for (std::size_t t = 0; t < out.points.size(); ++t)
        for (std::size_t i = 0; i < out.points[t].size(); ++i)
            out.points[t][i] = lambda * a.points[t][i] + (1.0 - lambda) * out.points[t][i];
    return out;
}

Trajectory mixed_sweep_lora(const DenoiserParams& base, const LoraAdapter& adapter,
                            const StepFn& step, const Trajectory& X, double lambda,
                            std::size_t threads) {
    if (lambda == 0.0) return phi_sweep(step, base, X, threads);
    return phi_sweep(step, merge(base, adapter, lambda), X, threads);
}

PicardRunReport run_pcm_inference(const PcmModel& pcm, const DenoiserParams& base,
                                  const StepFn& step, const Vec& x0, const SwitchConfig& sw,
                                  const PicardConfig& cfg, const Trajectory* reference) {
    sw.validate();
    check_compatible(step, base);
    const double terminal = sw.stiffness == 0.0 ? 1.0 : 0.0;
    auto may_stop = [&](std::size_t k) {
        return sw.mode == SwitchMode::none || lambda_schedule(k, sw.K, sw.stiffness) == terminal;
    };

    switch (sw.mode) {
        case SwitchMode::none:
            return run_picard(step, base, x0, cfg, reference);

        case SwitchMode::feature: {
            DenoiserParams full;
            if (pcm.full) full = *pcm.full;
            else if (pcm.adapter) full = merge(base, *pcm.adapter, 1.0);
            else throw std::invalid_argument("run_pcm_inference: no PCM weights");
            check_compatible(step, full);
            return detail::iterate(
                x0, step.steps(), cfg, reference,
                [&](std::size_t k, const Trajectory& X) {
                    const double lambda = lambda_schedule(k, sw.K, sw.stiffness);
                    const std::size_t sweeps = (lambda == 0.0 || lambda == 1.0) ? 1 : 2;
                    return std::pair{mixed_sweep_feature(full, base, step, X, lambda, cfg.threads),
                                     sweeps};
                },
                may_stop);
        }

        case SwitchMode::lora: {
            if (!pcm.adapter) throw std::invalid_argument("run_pcm_inference: lora mode needs adapters");
            check_lora(base, *pcm.adapter);
            return detail::iterate(
                x0, step.steps(), cfg, reference,
                [&](std::size_t k, const Trajectory& X) {
                    const double lambda = lambda_schedule(k, sw.K, sw.stiffness);
                    return std::pair{
                        mixed_sweep_lora(base, *pcm.adapter, step, X, lambda, cfg.threads),
                        std::size_t{1}};
                },
                may_stop);
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace pcm
