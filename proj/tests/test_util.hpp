#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "pcm/denoiser.hpp"

namespace pcm::test {

inline MlpShape small_shape(std::size_t width = 16) {
    MlpShape s;
    s.hidden = {width, width, width};
    return s;
}

inline DenoiserParams small_net(std::size_t T, std::uint64_t seed, std::size_t width = 16,
                                Activation act = Activation::silu) {
    MlpShape s = small_shape(width);
    s.activation = act;
    SeededRng rng(seed);
    return make_denoiser(s, NoiseSchedule::cosine(T), rng);
}

/// Network whose prediction is M x + c(t): one linear layer over [x, embedding].
inline DenoiserParams affine_net(std::size_t T, const Mat& M, std::uint64_t seed) {
    DenoiserParams p;
    p.state_dim = M.rows();
    p.embed_freqs = 2;
    p.schedule = NoiseSchedule::cosine(T);
    Layer l;
    l.weight = Mat(M.rows(), p.input_dim());
    SeededRng rng(seed);
    for (std::size_t r = 0; r < M.rows(); ++r) {
        for (std::size_t c = 0; c < M.cols(); ++c) l.weight(r, c) = M(r, c);
        for (std::size_t c = M.cols(); c < p.input_dim(); ++c) l.weight(r, c) = 0.3 * rng.normal();
    }
    l.bias = Vec(M.rows());
    for (double& b : l.bias) b = 0.2 * rng.normal();
    l.activation = Activation::identity;
    p.layers.push_back(std::move(l));
    return p;
}

/// Central difference of f at every entry of `values` (restored afterwards).
inline Vec central_diff(std::span<double> values, const std::function<double()>& f,
                        double h = 1e-6) {
    Vec out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = f();
        values[i] = keep - h;
        const double down = f();
        values[i] = keep;
        out[i] = (up - down) / (2 * h);
    }
    return out;
}

/// |a - b|_2 / max(|b|_2, floor)
inline double rel_error(std::span<const double> a, std::span<const double> b,
                        double floor = 1e-8) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

}  // namespace pcm::test
