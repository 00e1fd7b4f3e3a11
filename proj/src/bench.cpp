#include "pcm/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pcm/checkpoint.hpp"
#include "pcm/newton.hpp"
#include "pcm/parallel.hpp"
#include "pcm/svg.hpp"

namespace pcm {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void say(const CommandContext& ctx, const std::string& msg) {
    if (ctx.log) *ctx.log << msg << '\n';
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, end);
    return std::string(16 - s.size(), '0') + s;
}

std::string config_comment(const RunConfig& cfg, const std::string& command) {
    std::ostringstream o;
    o << "# pcm " << command << "\n";
    std::istringstream in(to_ini(cfg));
    for (std::string line; std::getline(in, line);) o << "# " << line << "\n";
    return o.str();
}

void write_text(const fs::path& path, const std::string& text) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
    write_file(path, std::span<const std::uint8_t>(p, text.size()));
}

ordered_json summary_head(const RunConfig& cfg, const std::string& command) {
    ordered_json j;
    j["schema"] = kSummarySchema;
    j["command"] = command;
    j["config"] = to_ini(cfg);
    return j;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

class Csv {
public:
    Csv(const RunConfig& cfg, const std::string& command, const std::string& columns)
        : text_(config_comment(cfg, command) + columns + "\n") {}

    template <class... Ts>
    void row(const Ts&... vs) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(vs), first = false), ...);
        text_ += "\n";
    }
    const std::string& text() const { return text_; }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    template <class T>
        requires std::is_integral_v<T>
    static std::string cell(T v) { return std::to_string(v); }

    std::string text_;
};

void check_model(const DenoiserParams& p, const RunConfig& cfg, const std::string& what) {
    if (p.steps() != cfg.T || p.state_dim != cfg.n)
        throw FormatError(what + " has (n=" + std::to_string(p.state_dim) + ", T=" +
                          std::to_string(p.steps()) + ") but the config asks for (n=" +
                          std::to_string(cfg.n) + ", T=" + std::to_string(cfg.T) + ")");
}

/// Geometric mean over seeds, per k, of the padded error curves.
Series mean_curve(const MethodCurves& c, const std::string& name, std::size_t len) {
    Series s{name, {}, {}};
    for (std::size_t k = 0; k < len; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < c.seeds.size(); ++i) {
            const auto e = c.padded_errors(i, len);
            acc += std::log10(std::max(e[k], 1e-300));
        }
        s.x.push_back(static_cast<double>(k + 1));
        s.y.push_back(std::pow(10.0, acc / static_cast<double>(c.seeds.size())));
    }
    return s;
}

ordered_json curve_summary(const MethodCurves& c, const RunConfig& cfg) {
    ordered_json j;
    const auto it = mean_iterations_to(c, cfg.tol, cfg.max_iters);
    j["iterations_to_tol_mean"] = it.mean;
    j["iterations_to_tol_unreached"] = it.unreached;
    std::vector<std::size_t> per_seed;
    double sweeps_acc = 0.0, final_acc = 0.0, final_max = 0.0;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
        const auto k = iterations_to(c.errors[s], cfg.tol);
        per_seed.push_back(k ? *k : cfg.max_iters + 1);
        sweeps_acc += static_cast<double>(k ? c.sweeps_at[s][*k - 1] : c.sweeps[s]);
        const double fe = c.errors[s].empty() ? 0.0 : c.errors[s].back();
        final_acc += fe;
        final_max = std::max(final_max, fe);
    }
    const double n = static_cast<double>(c.seeds.size());
    j["iterations_to_tol"] = per_seed;
    j["sweeps_to_tol_mean"] = sweeps_acc / n;
    // The sequential sampler needs T network evaluations in sequence; a
    // parallel run needs one sequential sweep per iteration.
    j["sweep_speedup"] = it.mean > 0 ? static_cast<double>(cfg.T) / it.mean : 0.0;
    j["final_error_mean"] = final_acc / n;
    j["final_error_max"] = final_max;
    return j;
}

std::string method_tag(SampleMethod m) {
    std::string s = to_string(m);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string to_string(SampleMethod m) {
    switch (m) {
        case SampleMethod::sequential: return "sequential";
        case SampleMethod::picard: return "picard";
        case SampleMethod::pcm: return "pcm";
        case SampleMethod::pcm_lora: return "pcm-lora";
        case SampleMethod::newton: return "newton";
    }
    return "?";
}

SampleMethod parse_sample_method(const std::string& name) {
    for (auto m : {SampleMethod::sequential, SampleMethod::picard, SampleMethod::pcm,
                   SampleMethod::pcm_lora, SampleMethod::newton})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown sampling method '" + name + "'");
}

fs::path CommandContext::resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
}

std::vector<double> MethodCurves::padded_errors(std::size_t s, std::size_t len) const {
    std::vector<double> e = errors.at(s);
    if (e.empty()) e.push_back(0.0);
    while (e.size() < len) e.push_back(e.back());
    return e;
}

ItersSummary mean_iterations_to(const MethodCurves& c, double eps, std::size_t max_iters) {
    return mean_iterations_to(c, std::vector<double>(c.seeds.size(), eps), max_iters);
}

ItersSummary mean_iterations_to(const MethodCurves& c, const std::vector<double>& eps,
                                std::size_t max_iters) {
    if (eps.size() != c.seeds.size()) throw DimensionError("mean_iterations_to: one eps per seed");
    ItersSummary out;
    if (c.seeds.empty()) return out;
    double acc = 0.0;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
        const auto k = iterations_to(c.errors[s], eps[s]);
        if (!k) ++out.unreached;
        acc += static_cast<double>(k ? *k : max_iters + 1);
    }
    out.mean = acc / static_cast<double>(c.seeds.size());
    return out;
}

AccelerationResult acceleration(const MethodCurves& method, const MethodCurves& picard,
                                std::size_t k_ref, std::size_t max_iters) {
    if (method.seeds != picard.seeds) throw DimensionError("acceleration: seed lists differ");
    if (k_ref < 1) throw std::invalid_argument("acceleration: k_ref must be >= 1");
    AccelerationResult r;
    for (std::size_t s = 0; s < picard.seeds.size(); ++s)
        r.eps.push_back(picard.padded_errors(s, k_ref)[k_ref - 1]);
    const auto m = mean_iterations_to(method, r.eps, max_iters);
    const auto p = mean_iterations_to(picard, r.eps, max_iters);
    r.method_mean = m.mean;
    r.picard_mean = p.mean;
    r.unreached = m.unreached;
    r.ratio = p.mean > 0 ? m.mean / p.mean : 0.0;
    return r;
}

TransitionResult transition(const std::vector<double>& errors, double tol) {
    TransitionResult r;
    if (errors.empty()) return r;
    r.final_error = errors.back();
    r.min_error = errors.front();
    r.argmin_k = 1;
    for (std::size_t k = 0; k < errors.size(); ++k)
        if (errors[k] < r.min_error) {
            r.min_error = errors[k];
            r.argmin_k = k + 1;
        }
    r.plateau_above_tol = r.final_error > tol;
    r.has_transition = r.argmin_k < errors.size() && r.final_error > r.min_error;
    return r;
}

Models load_models(const CommandContext& ctx, bool need_pcm, bool need_lora) {
    Models m;
    m.base = load_checkpoint(ctx.resolve(ctx.cfg.base_path));
    check_model(m.base, ctx.cfg, "base checkpoint");
    if (need_pcm) {
        m.pcm = load_checkpoint(ctx.resolve(ctx.cfg.ema_path));
        check_model(*m.pcm, ctx.cfg, "PCM checkpoint");
    }
    if (need_lora) m.lora = load_lora(ctx.resolve(ctx.cfg.lora_ema_path), m.base);
    return m;
}

MethodCurves run_method_curves(const std::string& name, const RunConfig& cfg, const Models& m,
                               SampleMethod method, double stiffness) {
    const StepFn step = cfg.make_step();
    check_compatible(step, m.base);
    PicardConfig pc = cfg.picard();
    pc.threads = 1;
    SwitchConfig sw = cfg.switching(stiffness);

    PcmModel pcm;
    if (method == SampleMethod::pcm) {
        if (!m.pcm) throw std::invalid_argument("run_method_curves: pcm weights not loaded");
        pcm.full = m.pcm;
        sw.mode = SwitchMode::feature;
    } else if (method == SampleMethod::pcm_lora) {
        if (!m.lora) throw std::invalid_argument("run_method_curves: lora adapter not loaded");
        pcm.adapter = m.lora;
        sw.mode = SwitchMode::lora;
    }

    MethodCurves c;
    c.name = name;
    c.seeds = cfg.seeds;
    const std::size_t S = cfg.seeds.size();
    c.residuals.resize(S);
    c.errors.resize(S);
    c.sweeps.resize(S);
    c.sweeps_at.resize(S);
    c.finals.resize(S);
    c.iterations.resize(S);
    std::vector<char> converged(S, 0);

    const auto t0 = Clock::now();
    parallel_for(S, cfg.threads, [&](std::size_t s) {
        const Vec x0 = cfg.noise(cfg.seeds[s]);
        const Trajectory ref = sequential_sample(step, m.base, x0);
        switch (method) {
            case SampleMethod::sequential: {
                c.finals[s] = ref.last();
                c.iterations[s] = cfg.T;
                c.sweeps[s] = 0;
                converged[s] = 1;
                return;
            }
            case SampleMethod::newton: {
                auto r = run_newton(step, m.base, x0, pc, &ref);
                c.residuals[s] = std::move(r.residuals);
                c.errors[s] = std::move(r.errors);
                c.iterations[s] = r.iterations;
                converged[s] = r.converged;
                c.finals[s] = r.final.last();
                for (std::size_t k = 1; k <= r.iterations; ++k) c.sweeps_at[s].push_back(k);
                c.sweeps[s] = r.iterations;
                return;
            }
            case SampleMethod::picard:
            case SampleMethod::pcm:
            case SampleMethod::pcm_lora: {
                auto r = method == SampleMethod::picard
                             ? run_picard(step, m.base, x0, pc, &ref)
                             : run_pcm_inference(pcm, m.base, step, x0, sw, pc, &ref);
                c.residuals[s] = std::move(r.residuals);
                c.errors[s] = std::move(r.errors);
                c.iterations[s] = r.iterations;
                converged[s] = r.converged;
                c.finals[s] = r.final.last();
                c.sweeps[s] = r.sweeps;
                std::size_t acc = 0;
                for (std::size_t k = 0; k < r.iterations; ++k) {
                    const double lambda = lambda_schedule(k, sw.K, sw.stiffness);
                    const bool doubled = method == SampleMethod::pcm && lambda > 0.0 && lambda < 1.0;
                    acc += doubled ? 2 : 1;
                    c.sweeps_at[s].push_back(acc);
                }
                return;
            }
        }
    });
    c.converged.assign(converged.begin(), converged.end());
    c.seconds = since(t0);
    return c;
}

// ---------------------------------------------------------------------------
// Commands

std::vector<fs::path> cmd_train_base(const CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    SeededRng data_rng(cfg.data_seed());
    const auto data = toy_dataset(cfg.task, cfg.data_count, data_rng);
    SeededRng init_rng(cfg.init_seed());
    DenoiserParams params = make_denoiser(cfg.mlp_shape(), cfg.make_schedule(), init_rng);

    DdpmConfig dc;
    dc.epochs = cfg.base_epochs;
    dc.batch_size = cfg.base_batch;
    dc.adam.lr = cfg.base_lr;
    dc.seed = mix_seed(cfg.seed, 7);
    say(ctx, "train-base: " + to_string(cfg.task) + ", " + std::to_string(data.size()) +
                 " points, " + std::to_string(params.parameter_count()) + " parameters");
    const DdpmResult res = ddpm_train(std::move(params), data, dc);

    const fs::path ckpt = ctx.resolve(cfg.base_path);
    save_checkpoint(res.params, ckpt);

    Csv csv(cfg, "train-base", "epoch,loss,eval_loss");
    for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
        csv.row(e, res.epoch_loss[e], res.eval_loss[e]);
    const fs::path csv_path = ctx.out_dir / "train_base.csv";
    write_text(csv_path, csv.text());

    ordered_json j = summary_head(cfg, "train-base");
    j["checkpoint_checksum"] = hex64(checksum(res.params));
    j["parameter_count"] = res.params.parameter_count();
    if (!res.epoch_loss.empty()) {
        j["initial_loss"] = res.epoch_loss.front();
        j["final_loss"] = res.epoch_loss.back();
        j["loss_ratio"] = res.epoch_loss.back() / res.epoch_loss.front();
    }
    const fs::path json_path = ctx.out_dir / "train_base.json";
    write_json(json_path, j);

    ordered_json t;
    t["command"] = "train-base";
    t["seconds"] = since(t0);
    write_json(ctx.out_dir / "timing.json", t);
    if (!res.epoch_loss.empty())
        say(ctx, "train-base: loss " + format_double(res.epoch_loss.front()) + " -> " +
                     format_double(res.epoch_loss.back()));
    return {ckpt, csv_path, json_path};
}

std::vector<fs::path> cmd_gen_traj(const CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    const Models m = load_models(ctx, false, false);
    const StepFn step = cfg.make_step();
    const auto ds = generate_dataset(m.base, step, cfg.N, cfg.K, cfg.dataset_seed(), cfg.threads);
    const fs::path path = ctx.resolve(cfg.dataset_path);
    save_dataset(ds, path);

    ordered_json j = summary_head(cfg, "gen-traj");
    j["N"] = ds.header.N;
    j["T"] = ds.header.T;
    j["K"] = ds.header.K;
    j["n"] = ds.header.n;
    j["solver"] = to_string(ds.header.solver);
    j["base_checksum"] = hex64(ds.header.base_checksum);
    j["rejected"] = ds.rejected;
    double worst = 0.0;
    for (const auto& rec : ds.records)
        worst = std::max(worst, residual_linf(phi_sweep(step, m.base, rec.fixed_point(), 1),
                                              rec.fixed_point()));
    j["max_fixed_point_residual"] = worst;
    const fs::path json_path = ctx.out_dir / "gen_traj.json";
    write_json(json_path, j);

    ordered_json t;
    t["command"] = "gen-traj";
    t["seconds"] = since(t0);
    write_json(ctx.out_dir / "timing.json", t);
    say(ctx, "gen-traj: " + std::to_string(ds.header.N) + " records, " +
                 std::to_string(ds.rejected) + " rejected");
    return {path, json_path};
}

std::vector<fs::path> cmd_train_pcm(const CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    const Models m = load_models(ctx, false, false);
    const StepFn step = cfg.make_step();
    const auto ds = load_dataset(ctx.resolve(cfg.dataset_path));
    if (ds.header.T != cfg.T || ds.header.K != cfg.K || ds.header.n != cfg.n ||
        ds.header.solver != cfg.solver)
        throw FormatError("trajectory dataset header (T, K, n, solver) does not match the config");

    PctConfig pc;
    pc.iterations = cfg.pct_iterations;
    pc.batch_records = cfg.pct_batch;
    pc.adam.lr = cfg.pct_lr;
    pc.ema_decay = cfg.ema_decay;
    pc.alpha_mode = cfg.alpha_mode;
    pc.seed = cfg.pct_seed();
    pc.use_lora = cfg.use_lora;
    pc.lora_rank = cfg.lora_rank;
    pc.select_every = cfg.select_every;
    pc.select_switch = cfg.switching();
    pc.select_picard = cfg.picard();
    pc.select_picard.max_iters = std::min(cfg.max_iters, cfg.T);
    pc.track_ema = true;
    pc.threads = cfg.threads;
    say(ctx, "train-pcm: " + std::to_string(pc.iterations) + " iterations, alpha mode " +
                 to_string(pc.alpha_mode) + (pc.use_lora ? ", lora" : ", full weights"));
    const PctResult res = train_pcm(m.base, ds, step, pc);

    std::vector<fs::path> written;
    if (cfg.use_lora) {
        const std::uint64_t base_sum = checksum(m.base);
        save_lora(*res.lora, base_sum, ctx.resolve(cfg.lora_path));
        save_lora(*res.lora_ema, base_sum, ctx.resolve(cfg.lora_ema_path));
        written.push_back(ctx.resolve(cfg.lora_path));
        written.push_back(ctx.resolve(cfg.lora_ema_path));
    }
    save_checkpoint(res.pcm, ctx.resolve(cfg.pcm_path));
    save_checkpoint(res.ema, ctx.resolve(cfg.ema_path));
    written.push_back(ctx.resolve(cfg.pcm_path));
    written.push_back(ctx.resolve(cfg.ema_path));

    Csv csv(cfg, "train-pcm", "iteration,loss");
    for (std::size_t i = 0; i < res.loss_history.size(); ++i) csv.row(i + 1, res.loss_history[i]);
    written.push_back(ctx.out_dir / "train_pcm.csv");
    write_text(written.back(), csv.text());

    // Held-out noises, disjoint stream from the training records.
    const auto heldout =
        generate_dataset(m.base, step, cfg.heldout_records, cfg.K, cfg.heldout_seed(), cfg.threads);
    const auto alphas = alpha_weights(cfg.K, m.base.schedule, cfg.alpha_mode, &ds);
    const double l_init = mean_pct_loss(m.base, heldout, step, alphas);
    const double l_final = mean_pct_loss(res.pcm, heldout, step, alphas);
    const double l_ema = mean_pct_loss(res.ema, heldout, step, alphas);

    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < res.ema_step.size(); ++i) {
        const double slack = 1e-12 * res.ema_bound[i] + res.ema_rounding[i];
        if (res.ema_step[i] > res.ema_bound[i] + slack) ++violations;
        if (res.ema_bound[i] > 0) worst = std::max(worst, res.ema_step[i] / res.ema_bound[i]);
    }

    ordered_json j = summary_head(cfg, "train-pcm");
    j["alpha_mode"] = to_string(cfg.alpha_mode);
    j["alpha_weights"] = alphas;
    j["use_lora"] = cfg.use_lora;
    j["iterations"] = res.loss_history.size();
    j["selected_iteration"] = res.selected_iteration;
    j["selection_scores"] = res.selection_scores;
    const std::size_t tail = std::max<std::size_t>(1, res.loss_history.size() / 10);
    double tail_acc = 0.0;
    for (std::size_t i = res.loss_history.size() - std::min(tail, res.loss_history.size());
         i < res.loss_history.size(); ++i)
        tail_acc += res.loss_history[i];
    j["final_train_loss"] = res.loss_history.empty() ? 0.0 : tail_acc / static_cast<double>(tail);
    j["heldout_loss_init"] = l_init;
    j["heldout_loss_final"] = l_final;
    j["heldout_loss_ema"] = l_ema;
    j["heldout_ratio_ema"] = l_ema / l_init;
    j["ema_bound_violations"] = violations;
    j["ema_step_over_bound_max"] = worst;
    j["pcm_checksum"] = hex64(checksum(res.pcm));
    j["ema_checksum"] = hex64(checksum(res.ema));
    written.push_back(ctx.out_dir / "train_pcm.json");
    write_json(written.back(), j);

    ordered_json t;
    t["command"] = "train-pcm";
    t["seconds"] = since(t0);
    write_json(ctx.out_dir / "timing.json", t);
    say(ctx, "train-pcm: held-out loss " + format_double(l_init) + " -> " + format_double(l_ema) +
                 " (EMA)");
    return written;
}

std::vector<fs::path> cmd_sample(const CommandContext& ctx, SampleMethod method) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    const bool need_pcm = method == SampleMethod::pcm;
    const bool need_lora = method == SampleMethod::pcm_lora;
    const Models m = load_models(ctx, need_pcm, need_lora);
    const std::string tag = method_tag(method);
    const MethodCurves c = run_method_curves(tag, cfg, m, method, cfg.stiffness);

    const StepFn step = cfg.make_step();
    std::string cols = "seed";
    for (std::size_t i = 0; i < cfg.n; ++i) cols += ",x" + std::to_string(i);
    cols += ",iterations,converged,error";
    Csv samples(cfg, "sample --method " + tag, cols);
    Csv report(cfg, "sample --method " + tag, "seed,k,residual,error");
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
        std::string row = std::to_string(c.seeds[s]);
        for (double v : c.finals[s]) row += "," + format_double(v);
        const double err = c.errors[s].empty() ? 0.0 : c.errors[s].back();
        row += "," + std::to_string(c.iterations[s]) + "," + (c.converged[s] ? "1" : "0") + "," +
               format_double(err);
        samples.row(row);
        for (std::size_t k = 0; k < c.errors[s].size(); ++k)
            report.row(c.seeds[s], k + 1, c.residuals[s][k], c.errors[s][k]);
    }
    const fs::path sp = ctx.out_dir / ("samples_" + tag + ".csv");
    const fs::path rp = ctx.out_dir / ("report_" + tag + ".csv");
    write_text(sp, samples.text());
    write_text(rp, report.text());

    ordered_json t;
    t["command"] = "sample";
    t["method"] = tag;
    t["seconds"] = since(t0);
    t["sampling_seconds"] = c.seconds;
    write_json(ctx.out_dir / "timing.json", t);
    say(ctx, "sample: " + tag + " on " + std::to_string(c.seeds.size()) + " seeds");
    return {sp, rp};
}

std::vector<fs::path> cmd_bench(const CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    const Models m = load_models(ctx, true, cfg.use_lora);

    std::vector<MethodCurves> curves;
    curves.push_back(run_method_curves("picard", cfg, m, SampleMethod::picard, 0.0));
    curves.push_back(run_method_curves("pcm-s" + format_double(cfg.stiffness), cfg, m,
                                       SampleMethod::pcm, cfg.stiffness));
    curves.push_back(run_method_curves("pcm-s0", cfg, m, SampleMethod::pcm, 0.0));
    if (cfg.use_lora)
        curves.push_back(run_method_curves("pcm-lora-s" + format_double(cfg.stiffness), cfg, m,
                                           SampleMethod::pcm_lora, cfg.stiffness));
    curves.push_back(run_method_curves("newton", cfg, m, SampleMethod::newton, 0.0));

    Csv csv(cfg, "bench", "method,seed,k,residual,error");
    for (const auto& c : curves)
        for (std::size_t s = 0; s < c.seeds.size(); ++s)
            for (std::size_t k = 0; k < c.errors[s].size(); ++k)
                csv.row(c.name, c.seeds[s], k + 1, c.residuals[s][k], c.errors[s][k]);
    const fs::path csv_path = ctx.out_dir / "bench.csv";
    write_text(csv_path, csv.text());

    std::vector<Series> series;
    for (const auto& c : curves) series.push_back(mean_curve(c, c.name, cfg.max_iters));
    PlotSpec plot;
    plot.title = "Error to the sequential sample vs iteration";
    plot.x_label = "iteration k";
    plot.y_label = "final-point error (geometric mean over seeds)";
    plot.guide = cfg.tol;
    plot.comment = to_ini(cfg);
    const fs::path svg_path = ctx.out_dir / "bench.svg";
    write_text(svg_path, line_plot(plot, series));

    ordered_json j = summary_head(cfg, "bench");
    j["seeds"] = cfg.seeds;
    j["tol"] = cfg.tol;
    ordered_json methods;
    for (const auto& c : curves) methods[c.name] = curve_summary(c, cfg);
    j["methods"] = methods;

    const MethodCurves& picard = curves[0];
    const std::size_t k_ref = std::max<std::size_t>(1, cfg.T / 2);
    ordered_json acc;
    acc["k_ref"] = k_ref;
    for (std::size_t i = 1; i < curves.size(); ++i) {
        if (curves[i].name == "newton" || curves[i].name == "pcm-s0") continue;
        const auto a = acceleration(curves[i], picard, k_ref, cfg.max_iters);
        acc[curves[i].name] = {{"ratio", a.ratio},
                               {"iterations_mean", a.method_mean},
                               {"picard_iterations_mean", a.picard_mean},
                               {"unreached", a.unreached}};
        acc["eps"] = a.eps;
    }
    j["acceleration"] = acc;

    const MethodCurves& pure = curves[2];
    ordered_json tr = ordered_json::array();
    std::size_t plateau = 0, with_transition = 0;
    for (std::size_t s = 0; s < pure.seeds.size(); ++s) {
        const auto r = transition(pure.errors[s], cfg.tol);
        plateau += r.plateau_above_tol;
        with_transition += r.has_transition;
        tr.push_back({{"seed", pure.seeds[s]},
                      {"final_error", r.final_error},
                      {"min_error", r.min_error},
                      {"argmin_k", r.argmin_k},
                      {"has_transition", r.has_transition}});
    }
    j["pure_pcm"] = {{"seeds_above_tol", plateau},
                     {"seeds_with_transition", with_transition},
                     {"per_seed", tr}};

    const MethodCurves& newton = curves.back();
    std::size_t newton_ok = 0;
    for (std::size_t s = 0; s < newton.seeds.size(); ++s) {
        const auto kn = iterations_to(newton.errors[s], cfg.tol);
        const auto kp = iterations_to(picard.errors[s], cfg.tol);
        const std::size_t a = kn ? *kn : cfg.max_iters + 1, b = kp ? *kp : cfg.max_iters + 1;
        newton_ok += a <= b;
    }
    j["newton_not_slower_seeds"] = newton_ok;
    const fs::path json_path = ctx.out_dir / "bench.json";
    write_json(json_path, j);

    ordered_json t;
    t["command"] = "bench";
    t["seconds"] = since(t0);
    for (const auto& c : curves) t["methods"][c.name] = c.seconds;
    write_json(ctx.out_dir / "timing.json", t);
    say(ctx, "bench: " + std::to_string(curves.size()) + " methods on " +
                 std::to_string(cfg.seeds.size()) + " seeds");
    return {csv_path, svg_path, json_path};
}

std::vector<fs::path> cmd_sweep_stiffness(const CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto t0 = Clock::now();
    const bool lora = cfg.switch_mode == SwitchMode::lora;
    const Models m = load_models(ctx, !lora, lora);
    const SampleMethod method = lora ? SampleMethod::pcm_lora : SampleMethod::pcm;

    const MethodCurves picard = run_method_curves("picard", cfg, m, SampleMethod::picard, 0.0);
    std::vector<MethodCurves> curves;
    for (double s : cfg.stiffness_list)
        curves.push_back(run_method_curves("s=" + format_double(s), cfg, m, method, s));

    Csv csv(cfg, "sweep-stiffness", "stiffness,seed,k,residual,error");
    for (std::size_t i = 0; i < curves.size(); ++i)
        for (std::size_t s = 0; s < curves[i].seeds.size(); ++s)
            for (std::size_t k = 0; k < curves[i].errors[s].size(); ++k)
                csv.row(cfg.stiffness_list[i], curves[i].seeds[s], k + 1,
                        curves[i].residuals[s][k], curves[i].errors[s][k]);
    const fs::path csv_path = ctx.out_dir / "sweep.csv";
    write_text(csv_path, csv.text());

    std::vector<Series> series{mean_curve(picard, "picard", cfg.max_iters)};
    for (const auto& c : curves) series.push_back(mean_curve(c, c.name, cfg.max_iters));
    PlotSpec plot;
    plot.title = "Stiffness sweep: error to the sequential sample";
    plot.x_label = "iteration k";
    plot.y_label = "final-point error (geometric mean over seeds)";
    plot.guide = cfg.tol;
    plot.comment = to_ini(cfg);
    const fs::path svg_path = ctx.out_dir / "sweep.svg";
    write_text(svg_path, line_plot(plot, series));

    ordered_json j = summary_head(cfg, "sweep-stiffness");
    j["seeds"] = cfg.seeds;
    j["tol"] = cfg.tol;
    j["picard"] = curve_summary(picard, cfg);
    const std::size_t k_ref = std::max<std::size_t>(1, cfg.T / 2);
    ordered_json per = ordered_json::array();
    for (std::size_t i = 0; i < curves.size(); ++i) {
        ordered_json e = curve_summary(curves[i], cfg);
        e["stiffness"] = cfg.stiffness_list[i];
        std::size_t plateau = 0, with_transition = 0;
        for (std::size_t s = 0; s < curves[i].seeds.size(); ++s) {
            const auto r = transition(curves[i].errors[s], cfg.tol);
            plateau += r.plateau_above_tol;
            with_transition += r.has_transition;
        }
        e["seeds_above_tol"] = plateau;
        e["seeds_with_transition"] = with_transition;
        const auto a = acceleration(curves[i], picard, k_ref, cfg.max_iters);
        e["acceleration_ratio"] = a.ratio;
        per.push_back(e);
    }
    j["curves"] = per;
    const fs::path json_path = ctx.out_dir / "sweep.json";
    write_json(json_path, j);

    ordered_json t;
    t["command"] = "sweep-stiffness";
    t["seconds"] = since(t0);
    write_json(ctx.out_dir / "timing.json", t);
    say(ctx, "sweep-stiffness: " + std::to_string(curves.size()) + " stiffness values");
    return {csv_path, svg_path, json_path};
}

}  // namespace pcm
