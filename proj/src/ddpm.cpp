#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pcm/denoiser.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

namespace {
// Fixed shard count so gradient sums do not depend on the worker count.
constexpr std::size_t kGradShards = 8;
}  // namespace

Vec corrupt(const NoiseSchedule& schedule, std::span<const double> data, std::size_t t,
            std::span<const double> noise) {
    if (data.size() != noise.size()) throw DimensionError("corrupt: length mismatch");
    const double s = std::sqrt(schedule.alpha(t));
    const double n = std::sqrt(schedule.var(t));
    Vec out(data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * data[i] + n * noise[i];
    return out;
}

double loss(const DenoiserParams& params, const Batch& batch, LossKind kind, double scale) {
    (void)kind;
    if (batch.size() == 0) throw std::invalid_argument("loss: empty batch");
    const double n = static_cast<double>(params.state_dim);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Vec xt = corrupt(params.schedule, batch.data[i], batch.times[i], batch.noises[i]);
        const Vec pred = predict(params, xt, batch.times[i]);
        double se = 0.0;
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const double d = pred[j] - batch.noises[i][j];
            se += d * d;
        }
        total += se / n;
    }
    return scale * total / static_cast<double>(batch.size());
}

LossGrad grad(const DenoiserParams& params, const Batch& batch, LossKind kind, double scale) {
    (void)kind;
    if (batch.size() == 0) throw std::invalid_argument("grad: empty batch");
    if (batch.times.size() != batch.size() || batch.noises.size() != batch.size())
        throw DimensionError("grad: batch fields have different lengths");
    const double n = static_cast<double>(params.state_dim);
    const double weight = scale / static_cast<double>(batch.size());

    std::vector<Gradient> shard_grad(kGradShards, zero_gradient(params));
    std::vector<double> shard_loss(kGradShards, 0.0);
    parallel_for(kGradShards, 0, [&](std::size_t s) {
        ForwardCache cache;
        for (std::size_t i = s; i < batch.size(); i += kGradShards) {
            const Vec xt =
                corrupt(params.schedule, batch.data[i], batch.times[i], batch.noises[i]);
            const Vec pred = predict_cached(params, xt, batch.times[i], cache);
            Vec cot(pred.size());
            double se = 0.0;
            for (std::size_t j = 0; j < pred.size(); ++j) {
                const double d = pred[j] - batch.noises[i][j];
                se += d * d;
                cot[j] = weight * 2.0 * d / n;
            }
            shard_loss[s] += se / n;
            accumulate_vjp(params, cache, cot, shard_grad[s]);
        }
    });

    LossGrad out{0.0, zero_gradient(params)};
    double total = 0.0;
    for (std::size_t s = 0; s < kGradShards; ++s) {
        total += shard_loss[s];
        add_gradient(out.grad, shard_grad[s]);
    }
    out.loss = scale * total / static_cast<double>(batch.size());
    return out;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const AdamConfig& cfg, std::vector<std::size_t> block_sizes, std::size_t total_steps)
    : cfg_(cfg), total_steps_(std::max<std::size_t>(total_steps, 1)) {
    for (std::size_t n : block_sizes) {
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }
}

double Adam::current_lr() const {
    if (!cfg_.cosine) return cfg_.lr;
    const double frac = std::min(1.0, static_cast<double>(step_) / static_cast<double>(total_steps_));
    return cfg_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void Adam::step(std::span<const std::span<double>> params,
                std::span<const std::span<double>> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw DimensionError("Adam: block count mismatch");
    const double lr = current_lr();
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    if (lr == 0.0) return;
    for (std::size_t b = 0; b < m_.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        if (p.size() != m_[b].size() || g.size() != m_[b].size())
            throw DimensionError("Adam: block size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m_[b][i] = cfg_.beta1 * m_[b][i] + (1.0 - cfg_.beta1) * g[i];
            v_[b][i] = cfg_.beta2 * v_[b][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m_[b][i] / bc1;
            const double vhat = v_[b][i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Base training

DdpmResult ddpm_train(DenoiserParams params, std::span<const Vec> dataset,
                      const DdpmConfig& cfg) {
    params.validate();
    if (dataset.empty()) throw std::invalid_argument("ddpm_train: empty dataset");
    const std::size_t T = params.steps();
    const std::size_t batch_size = std::min(cfg.batch_size, dataset.size());
    const std::size_t batches = (dataset.size() + batch_size - 1) / batch_size;

    std::vector<std::size_t> sizes;
    for (auto b : parameter_blocks(params)) sizes.push_back(b.size());
    Adam adam(cfg.adam, sizes, cfg.epochs * batches);

    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    // One fixed (t, noise) draw per point, re-scored after every epoch.
    Batch fixed;
    {
        SeededRng eval_rng(mix_seed(cfg.seed, 1));
        for (const Vec& x : dataset) {
            fixed.data.push_back(x);
            fixed.times.push_back(eval_rng.uniform_index(T));
            fixed.noises.push_back(gaussian(eval_rng, params.state_dim));
        }
    }

    DdpmResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b, ++step) {
            Batch batch;
            const std::size_t begin = b * batch_size;
            const std::size_t end = std::min(dataset.size(), begin + batch_size);
            for (std::size_t i = begin; i < end; ++i) {
                batch.data.push_back(dataset[order[i]]);
                batch.times.push_back(rng.uniform_index(T));
                batch.noises.push_back(gaussian(rng, params.state_dim));
            }
            LossGrad lg = grad(params, batch, LossKind::noise_mse);
            if (!std::isfinite(lg.loss)) throw NumericError("ddpm_train: non-finite loss", step);
            epoch_loss += lg.loss;
            auto pb = parameter_blocks(params);
            auto gb = gradient_blocks(lg.grad);
            adam.step(pb, gb);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
        result.eval_loss.push_back(loss(params, fixed, LossKind::noise_mse));
    }
    result.params = std::move(params);
    return result;
}

// ---------------------------------------------------------------------------
// Toy data

ToyKind parse_toy_kind(const std::string& name) {
    if (name == "gaussian-mixture-8") return ToyKind::gaussian_mixture_8;
    if (name == "two-moons") return ToyKind::two_moons;
    if (name == "swiss-roll-2d") return ToyKind::swiss_roll_2d;
    throw ConfigError("unknown toy dataset '" + name + "'");
}

std::string to_string(ToyKind kind) {
    switch (kind) {
        case ToyKind::gaussian_mixture_8: return "gaussian-mixture-8";
        case ToyKind::two_moons: return "two-moons";
        case ToyKind::swiss_roll_2d: return "swiss-roll-2d";
    }
    return "?";
}

std::vector<Vec> mixture_means() {
    std::vector<Vec> means;
    for (int j = 0; j < 8; ++j) {
        const double a = 2.0 * std::numbers::pi * j / 8.0;
        means.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
    }
    return means;
}

std::vector<Vec> toy_dataset(ToyKind kind, std::size_t count, SeededRng& rng) {
    std::vector<Vec> out;
    out.reserve(count);
    const auto means = mixture_means();
    for (std::size_t i = 0; i < count; ++i) {
        switch (kind) {
            case ToyKind::gaussian_mixture_8: {
                const Vec& m = means[rng.uniform_index(8)];
                const double a = rng.normal(), b = rng.normal();
                out.push_back({m[0] + 0.1 * a, m[1] + 0.1 * b});
                break;
            }
            case ToyKind::two_moons: {
                const bool upper = rng.uniform() < 0.5;
                const double th = std::numbers::pi * rng.uniform();
                double x = upper ? std::cos(th) : 1.0 - std::cos(th);
                double y = upper ? std::sin(th) : 0.5 - std::sin(th);
                const double a = rng.normal(), b = rng.normal();
                out.push_back({x + 0.05 * a - 0.5, y + 0.05 * b - 0.25});
                break;
            }
            case ToyKind::swiss_roll_2d: {
                const double s = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform());
                const double a = rng.normal(), b = rng.normal();
                out.push_back({s * std::cos(s) / 5.0 + 0.05 * a, s * std::sin(s) / 5.0 + 0.05 * b});
                break;
            }
        }
    }
    return out;
}

}  // namespace pcm
