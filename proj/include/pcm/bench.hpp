#pragma once

// Command implementations shared by the CLI and the acceptance suite.
//
// Every text artifact starts with the resolved configuration: CSV files as
// "# " comment lines, JSON files under "config", SVG files in an XML
// comment. Wall-clock measurements go to timing.json only, so all other
// outputs are byte-identical across reruns with the same config and seeds.
//
// CSV columns:
//   train_base.csv     epoch,loss,eval_loss
//   train_pcm.csv      iteration,loss
//   report_<m>.csv     seed,k,residual,error
//   samples_<m>.csv    seed,x0,...,x<n-1>,iterations,converged,error
//   bench.csv          method,seed,k,residual,error
//   sweep.csv          stiffness,seed,k,residual,error

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcm/config.hpp"

namespace pcm {

inline constexpr const char* kSummarySchema = "pcm-summary/1";

enum class SampleMethod { sequential, picard, pcm, pcm_lora, newton };
std::string to_string(SampleMethod m);
/// ConfigError for an unknown name.
SampleMethod parse_sample_method(const std::string& name);

struct CommandContext {
    RunConfig cfg;
    std::filesystem::path out_dir = ".";
    std::ostream* log = nullptr;

    /// Relative paths resolve against out_dir.
    std::filesystem::path resolve(const std::string& p) const;
};

/// One method's convergence curves over the sampler seeds.
struct MethodCurves {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> residuals;  // per seed, per k
    std::vector<std::vector<double>> errors;     // per seed, per k
    std::vector<std::size_t> sweeps;             // total network sweeps per seed
    std::vector<std::vector<std::size_t>> sweeps_at;  // cumulative sweeps after each k
    std::vector<Vec> finals;                     // last point of the final iterate
    std::vector<std::size_t> iterations;
    std::vector<bool> converged;
    double seconds = 0.0;

    /// errors[s] extended to `len` entries with its last value (a stopped run
    /// stays at its final iterate).
    std::vector<double> padded_errors(std::size_t s, std::size_t len) const;
};

/// Mean over seeds of first k with error <= eps (runs that never reach eps
/// count as max_iters + 1), plus how many runs never reached it.
struct ItersSummary {
    double mean = 0.0;
    std::size_t unreached = 0;
};
ItersSummary mean_iterations_to(const MethodCurves& c, double eps, std::size_t max_iters);
ItersSummary mean_iterations_to(const MethodCurves& c, const std::vector<double>& eps_per_seed,
                                std::size_t max_iters);

/// Iterations-to-eps ratio of `method` over `picard`, with eps per seed set to
/// the error Picard attains at iteration k_ref.
struct AccelerationResult {
    double ratio = 0.0;
    double method_mean = 0.0;
    double picard_mean = 0.0;
    std::size_t unreached = 0;
    std::vector<double> eps;
};
AccelerationResult acceleration(const MethodCurves& method, const MethodCurves& picard,
                                std::size_t k_ref, std::size_t max_iters);

/// Final error stays above tol and some iterate was closer than the last one.
struct TransitionResult {
    double final_error = 0.0;
    double min_error = 0.0;
    std::size_t argmin_k = 0;  // 1-based
    bool plateau_above_tol = false;
    bool has_transition = false;
};
TransitionResult transition(const std::vector<double>& errors, double tol);

// ---------------------------------------------------------------------------
// Curve producers (in-process; no files).

struct Models {
    DenoiserParams base;
    std::optional<DenoiserParams> pcm;        // selected EMA weights
    std::optional<LoraAdapter> lora;          // selected EMA adapter
};

/// Loads the models a command needs; FormatError if they do not match cfg.
Models load_models(const CommandContext& ctx, bool need_pcm, bool need_lora);

/// Runs `method` from every sampler seed against the base model's sequential
/// sample. `stiffness` applies to the pcm methods; s = 0 is pure PCM.
MethodCurves run_method_curves(const std::string& name, const RunConfig& cfg, const Models& m,
                               SampleMethod method, double stiffness);

// ---------------------------------------------------------------------------
// Commands. Each returns the list of files written.

std::vector<std::filesystem::path> cmd_train_base(const CommandContext& ctx);
std::vector<std::filesystem::path> cmd_gen_traj(const CommandContext& ctx);
std::vector<std::filesystem::path> cmd_train_pcm(const CommandContext& ctx);
std::vector<std::filesystem::path> cmd_sample(const CommandContext& ctx, SampleMethod method);
std::vector<std::filesystem::path> cmd_bench(const CommandContext& ctx);
std::vector<std::filesystem::path> cmd_sweep_stiffness(const CommandContext& ctx);

/// Shortest round-trip decimal rendering used in every CSV.
std::string format_double(double v);

}  // namespace pcm
