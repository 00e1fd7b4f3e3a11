#pragma once

// Picard consistency training: trajectory datasets from the base model, the
// weighted one-sweep consistency loss and its gradient, EMA, and the
// training loop (full weights or LoRA adapters).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcm/lora.hpp"
#include "pcm/picard.hpp"
#include "pcm/switching.hpp"

namespace pcm {

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    Vec x0;
    std::vector<Trajectory> history;  // X^0..X^K under the base model

    const Trajectory& fixed_point() const { return history.back(); }
    bool operator==(const TrajectoryRecord&) const = default;
};

struct DatasetHeader {
    std::uint32_t N = 0;
    std::uint32_t T = 0;
    std::uint32_t K = 0;
    std::uint32_t n = 0;
    SolverKind solver = SolverKind::ddim;
    std::uint64_t base_checksum = 0;

    bool operator==(const DatasetHeader&) const = default;
};

struct TrajectoryDataset {
    DatasetHeader header;
    std::vector<TrajectoryRecord> records;
    /// Records discarded for non-finite values and regenerated (not stored).
    std::size_t rejected = 0;

    bool operator==(const TrajectoryDataset& o) const {
        return header == o.header && records == o.records;
    }
};

/// N records of K base-model Picard sweeps from x0 ~ N(0, I). Record i uses
/// child seed mix_seed(seed, i + attempt * N); records run in parallel.
TrajectoryDataset generate_dataset(const DenoiserParams& base, const StepFn& step,
                                   std::size_t N, std::size_t K, std::uint64_t seed,
                                   std::size_t threads = 0);

// ---------------------------------------------------------------------------
// Loss weighting alpha(k) = 1 / sqrt(Var(k))

enum class AlphaMode { schedule_map, empirical, flat };

std::string to_string(AlphaMode mode);
AlphaMode parse_alpha_mode(const std::string& name);

/// 1 / sqrt(max(var, 1e-6))
double alpha_from_var(double var);

/// Weight for Picard iteration k in [0, K-1].
/// schedule-map: Var(k) = var(t_k), t_k = round(T k / K), so early
///   iterations take the high-noise end of the schedule.
/// empirical: Var(k) = mean squared deviation of X^k from X^K over `data`.
/// flat: 1.
double alpha_weight(std::size_t k, std::size_t K, const NoiseSchedule& schedule, AlphaMode mode,
                    const TrajectoryDataset* data = nullptr);

std::vector<double> alpha_weights(std::size_t K, const NoiseSchedule& schedule, AlphaMode mode,
                                  const TrajectoryDataset* data = nullptr);

// ---------------------------------------------------------------------------
// Consistency loss

/// alpha * mean over t = 1..T and coordinates of (X*_t - Phi(X^k)_t)^2.
double pct_loss(const DenoiserParams& params, const TrajectoryRecord& record, std::size_t k,
                const StepFn& step, double alpha);

/// Loss and exact gradient through the full sweep.
LossGrad pct_loss_grad(const DenoiserParams& params, const TrajectoryRecord& record,
                       std::size_t k, const StepFn& step, double alpha);

/// Same loss on raw trajectories (target = fixed point, input = X^k).
double consistency_mse(const Trajectory& target, const Trajectory& swept);

// ---------------------------------------------------------------------------
// EMA

/// ema <- mu * ema + (1 - mu) * current, element-wise. Throws
/// std::invalid_argument for mu outside [0, 1] or mismatched shapes.
void ema_update(std::span<const std::span<double>> ema,
                std::span<const std::span<const double>> current, double mu);
void ema_update(DenoiserParams& ema, const DenoiserParams& current, double mu);
void ema_update(LoraAdapter& ema, const LoraAdapter& current, double mu);

// ---------------------------------------------------------------------------
// Training

struct PctConfig {
    std::size_t iterations = 2000;
    std::size_t batch_records = 8;
    AdamConfig adam{};
    double ema_decay = 0.999;
    AlphaMode alpha_mode = AlphaMode::schedule_map;
    std::uint64_t seed = 0;

    bool use_lora = false;
    std::size_t lora_rank = 4;
    double lora_init_std = 0.1;

    /// Evaluate the EMA weights every `select_every` iterations (0 = never)
    /// on `select_seeds` held-out noises and keep the best snapshot.
    std::size_t select_every = 0;
    std::size_t select_seeds = 10;
    std::uint64_t select_seed_base = 1000003;
    SwitchConfig select_switch{};
    PicardConfig select_picard{};

    /// Record |ema_{i+1} - ema_i| and (1 - mu) |theta_i - ema_i| per iteration.
    bool track_ema = false;
    std::size_t threads = 0;
};

struct PctResult {
    DenoiserParams pcm;  // final trained weights (merged at scale 1 in LoRA mode)
    DenoiserParams ema;  // selected EMA weights (merged at scale 1 in LoRA mode)
    std::optional<LoraAdapter> lora;
    std::optional<LoraAdapter> lora_ema;

    std::vector<double> loss_history;  // mean minibatch loss per iteration
    std::vector<double> ema_step;      // |ema_{i+1} - ema_i|
    std::vector<double> ema_bound;     // (1 - mu) |theta_i - ema_i|
    std::vector<double> ema_rounding;  // 2 eps (|theta_i| + |ema_i|)
    std::vector<double> selection_scores;
    std::size_t selected_iteration = 0;
};

/// Mean over held-out seeds and k = 1..max_iters of the final-point error of
/// a switching run against the base model's sequential sample.
double selection_score(const PcmModel& pcm, const DenoiserParams& base, const StepFn& step,
                       std::span<const Vec> noises, const SwitchConfig& sw,
                       const PicardConfig& picard);

/// Throws FormatError if the dataset was not generated by `base`, and
/// NumericError on a non-finite loss.
PctResult train_pcm(const DenoiserParams& base, const TrajectoryDataset& data,
                    const StepFn& step, const PctConfig& cfg);

/// Mean loss over every record and every k in [0, K-1].
double mean_pct_loss(const DenoiserParams& params, const TrajectoryDataset& data,
                     const StepFn& step, std::span<const double> alphas);

}  // namespace pcm
