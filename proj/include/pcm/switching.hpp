#pragma once

// Model switching at inference: lambda(k) moves each Picard iteration from the
// consistency-trained model to the base model, either by mixing the two
// sweeps' outputs or by scaling LoRA weights before a single sweep.

#include <optional>
#include <string>

#include "pcm/lora.hpp"
#include "pcm/picard.hpp"

namespace pcm {

enum class SwitchMode { feature, lora, none };

std::string to_string(SwitchMode mode);
SwitchMode parse_switch_mode(const std::string& name);

struct SwitchConfig {
    double stiffness = 2.0;
    std::size_t K = 30;
    SwitchMode mode = SwitchMode::feature;

    void validate() const;
};

/// max(0, min(1, 1 - s k / K))
double lambda_schedule(std::size_t k, std::size_t K, double stiffness);

/// lambda * Phi(X; pcm) + (1 - lambda) * Phi(X; base). lambda = 1 and
/// lambda = 0 run only the corresponding sweep.
Trajectory mixed_sweep_feature(const DenoiserParams& pcm, const DenoiserParams& base,
                               const StepFn& step, const Trajectory& X, double lambda,
                               std::size_t threads = 0);

/// Phi(X; W0 + lambda * B A) with the merge done once before the sweep.
Trajectory mixed_sweep_lora(const DenoiserParams& base, const LoraAdapter& adapter,
                            const StepFn& step, const Trajectory& X, double lambda,
                            std::size_t threads = 0);

/// The consistency-trained model, as full weights or as adapters over base.
struct PcmModel {
    std::optional<DenoiserParams> full;
    std::optional<LoraAdapter> adapter;
};

/// Picard loop with lambda(k)-mixed sweeps. A residual below tol ends the run
/// only once lambda has reached its terminal value (0, or 1 when s = 0), so
/// a switching run never stops on an intermediate mixed fixed point.
/// mode = none runs plain Picard with the base model.
PicardRunReport run_pcm_inference(const PcmModel& pcm, const DenoiserParams& base,
                                  const StepFn& step, const Vec& x0, const SwitchConfig& sw,
                                  const PicardConfig& cfg, const Trajectory* reference = nullptr);

}  // namespace pcm
