#include "pcm/pct.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "pcm/checkpoint.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

// ---------------------------------------------------------------------------
// Dataset generation

TrajectoryDataset generate_dataset(const DenoiserParams& base, const StepFn& step,
                                   std::size_t N, std::size_t K, std::uint64_t seed,
                                   std::size_t threads) {
    check_compatible(step, base);
    if (K < 1) throw std::invalid_argument("generate_dataset: K must be >= 1");
    const std::size_t T = step.steps();

    TrajectoryDataset ds;
    ds.header = DatasetHeader{static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(T),
                              static_cast<std::uint32_t>(K),
                              static_cast<std::uint32_t>(base.state_dim), step.kind(),
                              checksum(base)};
    ds.records.resize(N);
    std::vector<std::size_t> rejected(N, 0);

    constexpr std::size_t kMaxAttempts = 64;
    parallel_for(N, threads, [&](std::size_t i) {
        for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
            const std::uint64_t child = mix_seed(seed, i + attempt * N);
            SeededRng rng(child);
            TrajectoryRecord rec{child, gaussian(rng, base.state_dim), {}};
            rec.history.reserve(K + 1);
            rec.history.push_back(Trajectory::constant(rec.x0, T));
            bool ok = true;
            for (std::size_t k = 0; k < K && ok; ++k) {
                rec.history.push_back(phi_sweep(step, base, rec.history.back(), 1));
                ok = rec.history.back().all_finite();
            }
            if (ok) {
                ds.records[i] = std::move(rec);
                return;
            }
            ++rejected[i];
        }
        throw NumericError("generate_dataset: record keeps producing non-finite values", i);
    });
    for (std::size_t r : rejected) ds.rejected += r;
    return ds;
}

// ---------------------------------------------------------------------------
// alpha(k)

std::string to_string(AlphaMode mode) {
    switch (mode) {
        case AlphaMode::schedule_map: return "schedule-map";
        case AlphaMode::empirical: return "empirical";
        case AlphaMode::flat: return "flat";
    }
    return "?";
}

AlphaMode parse_alpha_mode(const std::string& name) {
    if (name == "schedule-map") return AlphaMode::schedule_map;
    if (name == "empirical") return AlphaMode::empirical;
    if (name == "flat") return AlphaMode::flat;
    throw ConfigError("unknown alpha mode '" + name + "'");
}

double alpha_from_var(double var) { return 1.0 / std::sqrt(std::max(var, 1e-6)); }

double alpha_weight(std::size_t k, std::size_t K, const NoiseSchedule& schedule, AlphaMode mode,
                    const TrajectoryDataset* data) {
    if (K < 1 || k >= K) throw std::out_of_range("alpha_weight: k must lie in [0, K-1]");
    switch (mode) {
        case AlphaMode::flat:
            return 1.0;
        case AlphaMode::schedule_map: {
            const std::size_t T = schedule.steps();
            const auto t = static_cast<std::size_t>(
                std::lround(static_cast<double>(T) * static_cast<double>(k) / static_cast<double>(K)));
            return alpha_from_var(schedule.var(std::min(t, T)));
        }
        case AlphaMode::empirical: {
            if (!data || data->records.empty())
                throw std::invalid_argument("alpha_weight: empirical mode needs a dataset");
            if (k >= data->records.front().history.size())
                throw std::out_of_range("alpha_weight: k beyond stored history");
            double acc = 0.0;
            std::size_t count = 0;
            for (const auto& rec : data->records) {
                const Trajectory& xk = rec.history[k];
                const Trajectory& xs = rec.fixed_point();
                for (std::size_t t = 0; t < xk.points.size(); ++t)
                    for (std::size_t j = 0; j < xk.points[t].size(); ++j) {
                        const double d = xk.points[t][j] - xs.points[t][j];
                        acc += d * d;
                        ++count;
                    }
            }
            return alpha_from_var(acc / static_cast<double>(count));
        }
    }
    return 1.0;
}

std::vector<double> alpha_weights(std::size_t K, const NoiseSchedule& schedule, AlphaMode mode,
                                  const TrajectoryDataset* data) {
    std::vector<double> w(K);
    for (std::size_t k = 0; k < K; ++k) w[k] = alpha_weight(k, K, schedule, mode, data);
    return w;
}

// ---------------------------------------------------------------------------
// Loss

double consistency_mse(const Trajectory& target, const Trajectory& swept) {
    if (target.points.size() != swept.points.size() || target.dim() != swept.dim())
        throw DimensionError("consistency_mse: shape mismatch");
    const std::size_t T = target.steps();
    double acc = 0.0;
    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t j = 0; j < target.dim(); ++j) {
            const double d = target.points[t][j] - swept.points[t][j];
            acc += d * d;
        }
    return acc / static_cast<double>(T * target.dim());
}

namespace {
const Trajectory& history_at(const TrajectoryRecord& record, std::size_t k) {
    if (k + 1 >= record.history.size())
        throw std::out_of_range("pct_loss: k must lie in [0, K-1]");
    return record.history[k];
}
}  // namespace

double pct_loss(const DenoiserParams& params, const TrajectoryRecord& record, std::size_t k,
                const StepFn& step, double alpha) {
    const Trajectory swept = phi_sweep(step, params, history_at(record, k), 1);
    return alpha * consistency_mse(record.fixed_point(), swept);
}

LossGrad pct_loss_grad(const DenoiserParams& params, const TrajectoryRecord& record,
                       std::size_t k, const StepFn& step, double alpha) {
    const Trajectory& X = history_at(record, k);
    check_compatible(step, params, X);
    const Trajectory& target = record.fixed_point();
    const std::size_t T = X.steps();
    const std::size_t n = X.dim();

    // Forward: same arithmetic as phi_sweep, keeping activations per step.
    std::vector<ForwardCache> caches(T);
    Trajectory swept;
    swept.points.reserve(T + 1);
    swept.points.push_back(X.points[0]);
    for (std::size_t t = 0; t < T; ++t) {
        const Vec& x = X.points[t];
        Vec eps = predict_cached(params, x, t, caches[t]);
        Vec next = swept.points[t];
        if (step.kind() == SolverKind::euler_eq10) {
            const double Td = static_cast<double>(T);
            for (std::size_t j = 0; j < n; ++j) next[j] += eps[j] / Td;
        } else {
            const double c = step.carry(t) - 1.0, g = step.gain(t);
            for (std::size_t j = 0; j < n; ++j) next[j] += c * x[j] + g * eps[j];
        }
        swept.points.push_back(std::move(next));
    }

    LossGrad out{alpha * consistency_mse(target, swept), zero_gradient(params)};

    // Output t depends on increments 0..t-1, so increment i receives the
    // suffix sum of the residual cotangents for t > i.
    const double scale = 2.0 * alpha / static_cast<double>(T * n);
    Vec suffix(n, 0.0);
    Vec cot(n);
    for (std::size_t i = T; i-- > 0;) {
        for (std::size_t j = 0; j < n; ++j)
            suffix[j] += scale * (swept.points[i + 1][j] - target.points[i + 1][j]);
        const double g = step.gain(i);
        for (std::size_t j = 0; j < n; ++j) cot[j] = g * suffix[j];
        accumulate_vjp(params, caches[i], cot, out.grad);
    }
    return out;
}

double mean_pct_loss(const DenoiserParams& params, const TrajectoryDataset& data,
                     const StepFn& step, std::span<const double> alphas) {
    if (data.records.empty()) throw std::invalid_argument("mean_pct_loss: empty dataset");
    const std::size_t K = data.header.K;
    if (alphas.size() != K) throw DimensionError("mean_pct_loss: need K weights");
    std::vector<double> per(data.records.size(), 0.0);
    parallel_for(data.records.size(), 0, [&](std::size_t r) {
        for (std::size_t k = 0; k < K; ++k)
            per[r] += pct_loss(params, data.records[r], k, step, alphas[k]);
    });
    double acc = 0.0;
    for (double v : per) acc += v;
    return acc / static_cast<double>(data.records.size() * K);
}

// ---------------------------------------------------------------------------
// EMA

void ema_update(std::span<const std::span<double>> ema,
                std::span<const std::span<const double>> current, double mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("ema_update: mu must lie in [0, 1]");
    if (ema.size() != current.size()) throw std::invalid_argument("ema_update: shape mismatch");
    for (std::size_t b = 0; b < ema.size(); ++b) {
        if (ema[b].size() != current[b].size())
            throw std::invalid_argument("ema_update: shape mismatch");
        for (std::size_t i = 0; i < ema[b].size(); ++i)
            ema[b][i] = mu * ema[b][i] + (1.0 - mu) * current[b][i];
    }
}

void ema_update(DenoiserParams& ema, const DenoiserParams& current, double mu) {
    auto e = parameter_blocks(ema);
    auto c = parameter_blocks(current);
    ema_update(e, c, mu);
}

void ema_update(LoraAdapter& ema, const LoraAdapter& current, double mu) {
    auto e = parameter_blocks(ema);
    auto c = parameter_blocks(current);
    ema_update(e, c, mu);
}

// ---------------------------------------------------------------------------
// Training

double selection_score(const PcmModel& pcm, const DenoiserParams& base, const StepFn& step,
                       std::span<const Vec> noises, const SwitchConfig& sw,
                       const PicardConfig& picard) {
    PicardConfig cfg = picard;
    cfg.metric = ErrorMetric::final_point_l2;
    cfg.tol = std::numeric_limits<double>::min();  // run all iterations
    std::vector<double> per(noises.size(), 0.0);
    parallel_for(noises.size(), cfg.threads, [&](std::size_t s) {
        PicardConfig inner = cfg;
        inner.threads = 1;
        const Trajectory ref = sequential_sample(step, base, noises[s]);
        const auto rep = run_pcm_inference(pcm, base, step, noises[s], sw, inner, &ref);
        double acc = 0.0;
        for (double e : rep.errors) acc += e;
        per[s] = acc / static_cast<double>(rep.errors.size());
    });
    double acc = 0.0;
    for (double v : per) acc += v;
    return acc / static_cast<double>(noises.size());
}

namespace {

double block_distance(std::span<const std::span<const double>> a,
                      std::span<const std::span<const double>> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            const double d = a[i][j] - b[i][j];
            acc += d * d;
        }
    return std::sqrt(acc);
}

double block_norm(std::span<const std::span<const double>> a) {
    double acc = 0.0;
    for (auto b : a)
        for (double v : b) acc += v * v;
    return std::sqrt(acc);
}

// Floating-point error bound of one EMA update, measured in the same norm.
template <class Model>
double ema_rounding(const Model& current, const Model& ema) {
    return 2.0 * std::numeric_limits<double>::epsilon() *
           (block_norm(parameter_blocks(current)) + block_norm(parameter_blocks(ema)));
}

template <class Model>
std::vector<std::size_t> block_sizes(Model& m) {
    std::vector<std::size_t> s;
    for (auto b : parameter_blocks(m)) s.push_back(b.size());
    return s;
}

}  // namespace

PctResult train_pcm(const DenoiserParams& base, const TrajectoryDataset& data,
                    const StepFn& step, const PctConfig& cfg) {
    check_compatible(step, base);
    if (data.header.base_checksum != checksum(base))
        throw FormatError("trajectory dataset was generated by a different base model");
    if (data.header.T != step.steps() || data.header.n != base.state_dim ||
        data.header.solver != step.kind())
        throw FormatError("trajectory dataset header does not match model/solver");
    if (data.records.empty()) throw std::invalid_argument("train_pcm: empty dataset");
    if (cfg.batch_records < 1) throw ConfigError("train_pcm: batch_records must be >= 1");
    if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay <= 1.0))
        throw ConfigError("train_pcm: ema decay must lie in [0, 1]");

    const std::size_t K = data.header.K;
    const std::vector<double> alphas = alpha_weights(K, base.schedule, cfg.alpha_mode, &data);
    const double mu = cfg.ema_decay;
    SeededRng rng(cfg.seed);

    DenoiserParams theta = base;
    DenoiserParams theta_ema = base;
    std::optional<LoraAdapter> adapter, adapter_ema;
    if (cfg.use_lora) {
        adapter = make_lora(base, cfg.lora_rank, cfg.lora_init_std, rng);
        adapter_ema = adapter;
    }
    Adam adam(cfg.adam, cfg.use_lora ? block_sizes(*adapter) : block_sizes(theta),
              cfg.iterations);

    std::vector<Vec> held_out;
    for (std::size_t s = 0; s < cfg.select_seeds && cfg.select_every > 0; ++s) {
        SeededRng r(mix_seed(cfg.select_seed_base, s));
        held_out.push_back(gaussian(r, base.state_dim));
    }

    PctResult res;
    std::optional<double> best_score;
    DenoiserParams best_ema = base;
    std::optional<LoraAdapter> best_lora_ema;

    std::vector<std::size_t> rec_idx(cfg.batch_records), ks(cfg.batch_records);
    std::vector<LossGrad> per(cfg.batch_records);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t b = 0; b < cfg.batch_records; ++b) {
            rec_idx[b] = rng.uniform_index(data.records.size());
            ks[b] = rng.uniform_index(K);
        }
        if (cfg.use_lora) theta = merge(base, *adapter, 1.0);
        parallel_for(cfg.batch_records, cfg.threads, [&](std::size_t b) {
            per[b] = pct_loss_grad(theta, data.records[rec_idx[b]], ks[b], step, alphas[ks[b]]);
        });
        Gradient g = zero_gradient(theta);
        double loss = 0.0;
        const double w = 1.0 / static_cast<double>(cfg.batch_records);
        for (std::size_t b = 0; b < cfg.batch_records; ++b) {
            loss += per[b].loss * w;
            add_gradient(g, per[b].grad, w);
        }
        if (!std::isfinite(loss)) throw NumericError("train_pcm: non-finite loss", it);
        res.loss_history.push_back(loss);

        if (cfg.use_lora) {
            LoraAdapter ga = lora_gradient(*adapter, g);
            auto pb = parameter_blocks(*adapter);
            auto gb = parameter_blocks(ga);
            adam.step(pb, gb);
        } else {
            auto pb = parameter_blocks(theta);
            auto gb = gradient_blocks(g);
            adam.step(pb, gb);
        }

        if (cfg.use_lora) {
            std::optional<LoraAdapter> prev;
            if (cfg.track_ema) {
                prev = adapter_ema;
                res.ema_rounding.push_back(ema_rounding(std::as_const(*adapter), std::as_const(*adapter_ema)));
                res.ema_bound.push_back((1.0 - mu) * block_distance(parameter_blocks(std::as_const(*adapter)),
                                                                    parameter_blocks(std::as_const(*adapter_ema))));
            }
            ema_update(*adapter_ema, *adapter, mu);
            if (cfg.track_ema)
                res.ema_step.push_back(block_distance(parameter_blocks(std::as_const(*adapter_ema)),
                                                      parameter_blocks(std::as_const(*prev))));
        } else {
            std::optional<DenoiserParams> prev;
            if (cfg.track_ema) {
                prev = theta_ema;
                res.ema_rounding.push_back(ema_rounding(std::as_const(theta), std::as_const(theta_ema)));
                res.ema_bound.push_back((1.0 - mu) * block_distance(parameter_blocks(std::as_const(theta)),
                                                                    parameter_blocks(std::as_const(theta_ema))));
            }
            ema_update(theta_ema, theta, mu);
            if (cfg.track_ema)
                res.ema_step.push_back(block_distance(parameter_blocks(std::as_const(theta_ema)),
                                                      parameter_blocks(std::as_const(*prev))));
        }

        if (cfg.select_every > 0 && (it + 1) % cfg.select_every == 0) {
            PcmModel model;
            if (cfg.use_lora) model.adapter = adapter_ema;
            else model.full = theta_ema;
            const double score =
                selection_score(model, base, step, held_out, cfg.select_switch, cfg.select_picard);
            res.selection_scores.push_back(score);
            if (!best_score || score < *best_score) {
                best_score = score;
                res.selected_iteration = it + 1;
                if (cfg.use_lora) best_lora_ema = adapter_ema;
                else best_ema = theta_ema;
            }
        }
    }

    if (!best_score) {
        res.selected_iteration = cfg.iterations;
        best_ema = theta_ema;
        best_lora_ema = adapter_ema;
    }
    if (cfg.use_lora) {
        res.pcm = merge(base, *adapter, 1.0);
        res.ema = merge(base, *best_lora_ema, 1.0);
        res.lora = std::move(adapter);
        res.lora_ema = std::move(best_lora_ema);
    } else {
        res.pcm = std::move(theta);
        res.ema = std::move(best_ema);
    }
    return res;
}

}  // namespace pcm
