#pragma once

// Time-conditioned MLP noise predictor, its noise schedule, and exact
// first-order derivatives (reverse-mode gradient, forward-mode JVP).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcm/core.hpp"

namespace pcm {

/// Signal fraction alpha(t), t = 0..T. alpha(0) = 0 is pure noise and alpha
/// increases towards the data end of the trajectory. Corruption at step t is
/// sqrt(alpha) * data + sqrt(1 - alpha) * noise.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    /// Validates alpha(0) = 0, strict increase, alpha(T) <= 1.
    explicit NoiseSchedule(Vec alpha);

    static NoiseSchedule linear(std::size_t steps, double alpha_max = 0.999);
    /// alpha(t) = alpha_max * sin^2(pi/2 * t/T)
    static NoiseSchedule cosine(std::size_t steps, double alpha_max = 0.999);

    std::size_t steps() const { return alpha_.empty() ? 0 : alpha_.size() - 1; }
    double alpha(std::size_t t) const { return alpha_.at(t); }
    double var(std::size_t t) const { return 1.0 - alpha_.at(t); }
    std::span<const double> alphas() const { return alpha_; }

    bool operator==(const NoiseSchedule&) const = default;

private:
    Vec alpha_;
};

enum class Activation : std::uint32_t { identity = 0, tanh = 1, silu = 2 };

struct Layer {
    Mat weight;  // out x in
    Vec bias;    // out
    Activation activation = Activation::identity;

    bool operator==(const Layer&) const = default;
};

/// Network input is [x, sin(2^j pi t/T), cos(2^j pi t/T) for j < embed_freqs].
struct DenoiserParams {
    std::size_t state_dim = 0;
    std::size_t embed_freqs = 0;
    std::vector<Layer> layers;
    NoiseSchedule schedule;

    std::size_t input_dim() const { return state_dim + 2 * embed_freqs; }
    std::size_t steps() const { return schedule.steps(); }
    std::size_t parameter_count() const;

    /// Throws DimensionError if the layer chain is inconsistent.
    void validate() const;

    bool operator==(const DenoiserParams&) const = default;
};

struct LayerGrad {
    Mat weight;
    Vec bias;
};
using Gradient = std::vector<LayerGrad>;

struct MlpShape {
    std::size_t state_dim = 2;
    std::size_t embed_freqs = 4;
    std::vector<std::size_t> hidden = {64, 64, 64};
    Activation activation = Activation::silu;
};

/// Gaussian init with variance 1/fan_in, zero biases; output layer is linear.
DenoiserParams make_denoiser(const MlpShape& shape, NoiseSchedule schedule, SeededRng& rng);
/// Same shape, every weight and bias zero.
DenoiserParams make_zero_denoiser(const MlpShape& shape, NoiseSchedule schedule);

Vec time_embedding(std::size_t t, std::size_t steps, std::size_t freqs);

Vec predict(const DenoiserParams& params, std::span<const double> x, std::size_t t);

/// (d predict / dx) * v by tangent propagation through every layer.
Vec jvp(const DenoiserParams& params, std::span<const double> x, std::size_t t,
        std::span<const double> v);

/// Activations kept from a forward pass for reverse-mode differentiation.
struct ForwardCache {
    std::vector<Vec> inputs;  // input to layer l
    std::vector<Vec> pre;     // pre-activation of layer l
};

Vec predict_cached(const DenoiserParams& params, std::span<const double> x, std::size_t t,
                   ForwardCache& cache);

/// grad += d<cotangent, predict>/d(params), using a cache from predict_cached.
void accumulate_vjp(const DenoiserParams& params, const ForwardCache& cache,
                    std::span<const double> cotangent, Gradient& grad);

Gradient zero_gradient(const DenoiserParams& params);
void add_gradient(Gradient& into, const Gradient& other, double scale = 1.0);
double gradient_norm(const Gradient& grad);

/// Flat views over every trainable value, in layer order (W then b).
std::vector<std::span<double>> parameter_blocks(DenoiserParams& params);
std::vector<std::span<const double>> parameter_blocks(const DenoiserParams& params);
std::vector<std::span<double>> gradient_blocks(Gradient& grad);

/// Training examples for the noise-prediction objective.
struct Batch {
    std::vector<Vec> data;    // clean points
    std::vector<std::size_t> times;
    std::vector<Vec> noises;

    std::size_t size() const { return data.size(); }
};

enum class LossKind { noise_mse };

struct LossGrad {
    double loss = 0.0;
    Gradient grad;
};

/// sqrt(alpha(t)) * data + sqrt(1 - alpha(t)) * noise
Vec corrupt(const NoiseSchedule& schedule, std::span<const double> data, std::size_t t,
            std::span<const double> noise);

/// scale * mean over the batch of |predict(corrupt(x, t, eps), t) - eps|^2 / n
double loss(const DenoiserParams& params, const Batch& batch, LossKind kind, double scale = 1.0);
LossGrad grad(const DenoiserParams& params, const Batch& batch, LossKind kind,
              double scale = 1.0);

// ---------------------------------------------------------------------------
// Base-model training
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool cosine = true;  // lr * 0.5 * (1 + cos(pi * step / total_steps))
};

/// Adam over an arbitrary list of parameter blocks.
class Adam {
public:
    Adam(const AdamConfig& cfg, std::vector<std::size_t> block_sizes, std::size_t total_steps);

    double current_lr() const;
    std::size_t step_count() const { return step_; }

    void step(std::span<const std::span<double>> params,
              std::span<const std::span<double>> grads);

private:
    AdamConfig cfg_;
    std::size_t total_steps_;
    std::size_t step_ = 0;
    std::vector<Vec> m_;
    std::vector<Vec> v_;
};

struct DdpmConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    AdamConfig adam{};
    std::uint64_t seed = 0;
};

struct DdpmResult {
    DenoiserParams params;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
    /// Loss after each epoch on the whole data set with one fixed (t, noise)
    /// draw per point, so epochs differ only through the weights.
    std::vector<double> eval_loss;
};

/// Minimises the noise-prediction MSE on `dataset` with times drawn
/// uniformly from {0, ..., T-1}. Throws NumericError on a non-finite loss.
DdpmResult ddpm_train(DenoiserParams params, std::span<const Vec> dataset,
                      const DdpmConfig& cfg);

// ---------------------------------------------------------------------------
// Toy data
// ---------------------------------------------------------------------------

enum class ToyKind { gaussian_mixture_8, two_moons, swiss_roll_2d };

/// Throws ConfigError for an unknown name.
ToyKind parse_toy_kind(const std::string& name);
std::string to_string(ToyKind kind);

/// Mixture centres: radius 2 at angles 2*pi*j/8.
std::vector<Vec> mixture_means();

/// gaussian-mixture-8: uniform centre + N(0, 0.1^2 I).
/// two-moons: unit half-circles offset by (1, -0.5), noise 0.05, shifted by (-0.5, -0.25).
/// swiss-roll-2d: s = 1.5 pi (1 + 2u), (s cos s, s sin s) / 5, noise 0.05.
std::vector<Vec> toy_dataset(ToyKind kind, std::size_t count, SeededRng& rng);

}  // namespace pcm
