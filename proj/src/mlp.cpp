#include <cmath>
#include <numbers>

#include "pcm/denoiser.hpp"
#include "pcm/kernels.hpp"

namespace pcm {

// ---------------------------------------------------------------------------
// NoiseSchedule

NoiseSchedule::NoiseSchedule(Vec alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) throw std::invalid_argument("NoiseSchedule: need T >= 1");
    if (alpha_.front() != 0.0) throw std::invalid_argument("NoiseSchedule: alpha(0) must be 0");
    for (std::size_t t = 1; t < alpha_.size(); ++t) {
        if (!(alpha_[t] > alpha_[t - 1]))
            throw std::invalid_argument("NoiseSchedule: alpha not strictly increasing at t=" +
                                        std::to_string(t));
    }
    if (alpha_.back() > 1.0) throw std::invalid_argument("NoiseSchedule: alpha(T) > 1");
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double alpha_max) {
    Vec a(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t)
        a[t] = alpha_max * static_cast<double>(t) / static_cast<double>(steps);
    return NoiseSchedule(std::move(a));
}

NoiseSchedule NoiseSchedule::cosine(std::size_t steps, double alpha_max) {
    Vec a(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) {
        const double s = std::sin(0.5 * std::numbers::pi * static_cast<double>(t) /
                                  static_cast<double>(steps));
        a[t] = alpha_max * s * s;
    }
    a[0] = 0.0;
    return NoiseSchedule(std::move(a));
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t DenoiserParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void DenoiserParams::validate() const {
    if (layers.empty()) throw DimensionError("denoiser has no layers");
    std::size_t width = input_dim();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weight.cols() != width || l.bias.size() != l.weight.rows())
            throw DimensionError("denoiser layer " + std::to_string(i) + " does not chain");
        width = l.weight.rows();
    }
    if (width != state_dim) throw DimensionError("denoiser output dim != state dim");
}

namespace {

std::vector<std::size_t> layer_widths(const MlpShape& shape) {
    std::vector<std::size_t> w{shape.state_dim + 2 * shape.embed_freqs};
    w.insert(w.end(), shape.hidden.begin(), shape.hidden.end());
    w.push_back(shape.state_dim);
    return w;
}

DenoiserParams shaped(const MlpShape& shape, NoiseSchedule schedule) {
    DenoiserParams p;
    p.state_dim = shape.state_dim;
    p.embed_freqs = shape.embed_freqs;
    p.schedule = std::move(schedule);
    const auto widths = layer_widths(shape);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        p.layers.push_back(Layer{Mat(widths[i + 1], widths[i]), Vec(widths[i + 1], 0.0),
                                 last ? Activation::identity : shape.activation});
    }
    return p;
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::tanh: return std::tanh(z);
        case Activation::silu: return z / (1.0 + std::exp(-z));
    }
    return z;
}

double activate_deriv(Activation a, double z) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::tanh: {
            const double y = std::tanh(z);
            return 1.0 - y * y;
        }
        case Activation::silu: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 + z * (1.0 - s));
        }
    }
    return 1.0;
}

Vec network_input(const DenoiserParams& params, std::span<const double> x, std::size_t t) {
    if (x.size() != params.state_dim)
        throw DimensionError("predict: state has " + std::to_string(x.size()) +
                             " entries, model expects " + std::to_string(params.state_dim));
    if (t > params.steps())
        throw std::out_of_range("predict: t=" + std::to_string(t) + " > T");
    Vec in(x.begin(), x.end());
    const Vec emb = time_embedding(t, params.steps(), params.embed_freqs);
    in.insert(in.end(), emb.begin(), emb.end());
    return in;
}

// z = W h + b
Vec affine(const Layer& l, const Vec& h) {
    Vec z(l.weight.rows());
    kernels::active().matvec(l.weight.rows(), l.weight.cols(), l.weight.data().data(), h.data(),
                             z.data());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += l.bias[i];
    return z;
}

}  // namespace

DenoiserParams make_denoiser(const MlpShape& shape, NoiseSchedule schedule, SeededRng& rng) {
    DenoiserParams p = shaped(shape, std::move(schedule));
    for (auto& l : p.layers) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        for (double& w : l.weight.data()) w = scale * rng.normal();
    }
    return p;
}

DenoiserParams make_zero_denoiser(const MlpShape& shape, NoiseSchedule schedule) {
    return shaped(shape, std::move(schedule));
}

Vec time_embedding(std::size_t t, std::size_t steps, std::size_t freqs) {
    Vec e(2 * freqs);
    const double u = static_cast<double>(t) / static_cast<double>(steps);
    double f = std::numbers::pi;
    for (std::size_t j = 0; j < freqs; ++j, f *= 2.0) {
        e[2 * j] = std::sin(f * u);
        e[2 * j + 1] = std::cos(f * u);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Forward, JVP, VJP

Vec predict(const DenoiserParams& params, std::span<const double> x, std::size_t t) {
    Vec h = network_input(params, x, t);
    for (const auto& l : params.layers) {
        if (h.size() != l.weight.cols()) throw DimensionError("predict: layer width mismatch");
        Vec z = affine(l, h);
        for (double& v : z) v = activate(l.activation, v);
        h = std::move(z);
    }
    return h;
}

Vec jvp(const DenoiserParams& params, std::span<const double> x, std::size_t t,
        std::span<const double> v) {
    if (v.size() != params.state_dim) throw DimensionError("jvp: tangent length mismatch");
    Vec h = network_input(params, x, t);
    Vec dh(h.size(), 0.0);
    std::copy(v.begin(), v.end(), dh.begin());
    const auto& k = kernels::active();
    for (const auto& l : params.layers) {
        if (h.size() != l.weight.cols()) throw DimensionError("jvp: layer width mismatch");
        Vec z = affine(l, h);
        Vec dz(l.weight.rows());
        k.matvec(l.weight.rows(), l.weight.cols(), l.weight.data().data(), dh.data(), dz.data());
        for (std::size_t i = 0; i < z.size(); ++i) {
            dz[i] *= activate_deriv(l.activation, z[i]);
            z[i] = activate(l.activation, z[i]);
        }
        h = std::move(z);
        dh = std::move(dz);
    }
    return dh;
}

Vec predict_cached(const DenoiserParams& params, std::span<const double> x, std::size_t t,
                   ForwardCache& cache) {
    cache.inputs.clear();
    cache.pre.clear();
    Vec h = network_input(params, x, t);
    for (const auto& l : params.layers) {
        if (h.size() != l.weight.cols()) throw DimensionError("predict: layer width mismatch");
        Vec z = affine(l, h);
        cache.inputs.push_back(std::move(h));
        h.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) h[i] = activate(l.activation, z[i]);
        cache.pre.push_back(std::move(z));
    }
    return h;
}

void accumulate_vjp(const DenoiserParams& params, const ForwardCache& cache,
                    std::span<const double> cotangent, Gradient& grad) {
    const auto& k = kernels::active();
    Vec g(cotangent.begin(), cotangent.end());
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const Layer& l = params.layers[li];
        const Vec& z = cache.pre[li];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activate_deriv(l.activation, z[i]);
        LayerGrad& lg = grad[li];
        k.outer_acc(l.weight.rows(), l.weight.cols(), g.data(), cache.inputs[li].data(),
                    lg.weight.data().data());
        k.axpy(g.size(), 1.0, g.data(), lg.bias.data());
        if (li == 0) break;
        Vec prev(l.weight.cols());
        k.matvec_t(l.weight.rows(), l.weight.cols(), l.weight.data().data(), g.data(),
                   prev.data());
        g = std::move(prev);
    }
}

Gradient zero_gradient(const DenoiserParams& params) {
    Gradient g;
    g.reserve(params.layers.size());
    for (const auto& l : params.layers)
        g.push_back(LayerGrad{Mat(l.weight.rows(), l.weight.cols()), Vec(l.bias.size(), 0.0)});
    return g;
}

void add_gradient(Gradient& into, const Gradient& other, double scale) {
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < into.size(); ++i) {
        k.axpy(into[i].weight.size(), scale, other[i].weight.data().data(),
               into[i].weight.data().data());
        k.axpy(into[i].bias.size(), scale, other[i].bias.data(), into[i].bias.data());
    }
}

double gradient_norm(const Gradient& grad) {
    double acc = 0.0;
    for (const auto& l : grad) {
        for (double w : l.weight.data()) acc += w * w;
        for (double b : l.bias) acc += b * b;
    }
    return std::sqrt(acc);
}

std::vector<std::span<double>> parameter_blocks(DenoiserParams& params) {
    std::vector<std::span<double>> out;
    for (auto& l : params.layers) {
        out.emplace_back(l.weight.data());
        out.emplace_back(l.bias);
    }
    return out;
}

std::vector<std::span<const double>> parameter_blocks(const DenoiserParams& params) {
    std::vector<std::span<const double>> out;
    for (const auto& l : params.layers) {
        out.emplace_back(l.weight.data());
        out.emplace_back(l.bias);
    }
    return out;
}

std::vector<std::span<double>> gradient_blocks(Gradient& grad) {
    std::vector<std::span<double>> out;
    for (auto& l : grad) {
        out.emplace_back(l.weight.data());
        out.emplace_back(l.bias);
    }
    return out;
}

}  // namespace pcm
