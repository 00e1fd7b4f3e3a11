#pragma once

// Run configuration: an INI file with sections [task] [model] [base]
// [sampler] [pct] [switch] [paths] [run]. Every key is optional; unknown
// sections or keys are rejected so that typos do not silently fall back to a
// default.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcm/denoiser.hpp"
#include "pcm/pct.hpp"
#include "pcm/picard.hpp"
#include "pcm/solver.hpp"
#include "pcm/switching.hpp"

namespace pcm {

struct RunConfig {
    // [task]
    ToyKind task = ToyKind::gaussian_mixture_8;
    std::size_t data_count = 4000;

    // [model]
    std::size_t n = 2;
    std::size_t T = 50;
    std::size_t width = 64;
    std::size_t depth = 3;
    std::size_t embed_freqs = 4;
    std::string schedule = "cosine";
    SolverKind solver = SolverKind::ddim;

    // [base]
    std::size_t base_epochs = 200;
    std::size_t base_batch = 256;
    double base_lr = 1e-3;

    // [sampler]
    std::size_t max_iters = 50;
    /// Error threshold for iterations-to-tol (final-point L2 to the sequential sample).
    double tol = 1e-3;
    /// Residual that ends a run early; 0 runs every iteration.
    double stop_tol = 0.0;
    ErrorMetric metric = ErrorMetric::final_point_l2;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

    // [pct]
    std::size_t N = 1000;
    std::size_t K = 30;
    std::size_t pct_iterations = 20000;
    std::size_t pct_batch = 8;
    double pct_lr = 2e-3;
    double ema_decay = 0.999;
    AlphaMode alpha_mode = AlphaMode::schedule_map;
    bool use_lora = false;
    std::size_t lora_rank = 8;
    std::size_t select_every = 0;
    std::size_t heldout_records = 50;

    // [switch]
    double stiffness = 2.0;
    SwitchMode switch_mode = SwitchMode::feature;
    std::vector<double> stiffness_list = {0, 2, 4, 6, 8, 10};

    // [paths] (relative paths resolve against the output directory)
    std::string base_path = "base.ckpt";
    std::string dataset_path = "traj.pctd";
    std::string pcm_path = "pcm.ckpt";
    std::string ema_path = "pcm_ema.ckpt";
    std::string lora_path = "pcm.lora";
    std::string lora_ema_path = "pcm_ema.lora";

    // [run]
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    bool operator==(const RunConfig&) const = default;

    /// ConfigError on an out-of-range value.
    void validate() const;

    NoiseSchedule make_schedule() const;
    MlpShape mlp_shape() const;
    StepFn make_step() const;
    PicardConfig picard() const;
    SwitchConfig switching() const;
    SwitchConfig switching(double stiffness) const;

    /// Derived seeds, one stream per purpose.
    std::uint64_t init_seed() const;
    std::uint64_t data_seed() const;
    std::uint64_t dataset_seed() const;
    std::uint64_t heldout_seed() const;
    std::uint64_t pct_seed() const;
    /// Initial noise of sampler seed s.
    Vec noise(std::uint64_t s) const;
};

/// ConfigError for malformed text, unknown keys or invalid values.
RunConfig parse_config(const std::string& text);
/// IoError when unreadable, otherwise as parse_config.
RunConfig load_config(const std::filesystem::path& path);
/// Canonical INI rendering of every key; parse_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& cfg);

}  // namespace pcm
