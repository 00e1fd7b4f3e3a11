#include "pcm/lora.hpp"

#include <algorithm>

namespace pcm {

std::size_t LoraAdapter::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.down.size() + l.up.size();
    return n;
}

LoraAdapter make_lora(const DenoiserParams& base, std::size_t rank, double init_std,
                      SeededRng& rng) {
    if (rank < 1) throw std::invalid_argument("make_lora: rank must be >= 1");
    LoraAdapter a;
    for (const auto& l : base.layers) {
        const std::size_t in = l.weight.cols(), out = l.weight.rows();
        const std::size_t cap = std::min(in, out);
        const std::size_t r = cap <= 1 ? 0 : std::min(rank, cap - 1);
        LoraLayer ll{Mat(r, in), Mat(out, r)};
        for (double& w : ll.down.data()) w = init_std * rng.normal();
        a.layers.push_back(std::move(ll));
    }
    return a;
}

void check_lora(const DenoiserParams& base, const LoraAdapter& adapter) {
    if (adapter.layers.size() != base.layers.size())
        throw DimensionError("LoRA adapter layer count does not match base");
    for (std::size_t i = 0; i < base.layers.size(); ++i) {
        const auto& w = base.layers[i].weight;
        const auto& l = adapter.layers[i];
        const std::size_t r = l.rank();
        if (l.down.cols() != w.cols() || l.up.rows() != w.rows() || l.up.cols() != r)
            throw DimensionError("LoRA layer " + std::to_string(i) + " shape mismatch");
        if (r > 0 && r >= std::min(w.rows(), w.cols()))
            throw DimensionError("LoRA layer " + std::to_string(i) + " rank too large");
    }
}

Mat lora_delta(const LoraLayer& layer) {
    const std::size_t out = layer.up.rows(), in = layer.down.cols(), r = layer.rank();
    Mat d(out, in);
    for (std::size_t i = 0; i < out; ++i)
        for (std::size_t k = 0; k < r; ++k) {
            const double b = layer.up(i, k);
            for (std::size_t j = 0; j < in; ++j) d(i, j) += b * layer.down(k, j);
        }
    return d;
}

Mat merge_weight(const Mat& w0, const LoraLayer& layer, double scale) {
    if (layer.up.rows() != w0.rows() || layer.down.cols() != w0.cols())
        throw DimensionError("merge_weight: adapter does not fit weight");
    Mat w = w0;
    if (scale == 0.0 || layer.rank() == 0) return w;
    const Mat d = lora_delta(layer);
    auto wd = w.data();
    auto dd = d.data();
    for (std::size_t i = 0; i < wd.size(); ++i)
        if (dd[i] != 0.0) wd[i] += scale * dd[i];
    return w;
}

Vec lora_forward(const Mat& w0, const LoraLayer& layer, std::span<const double> x, double scale) {
    return matvec(merge_weight(w0, layer, scale), x);
}

DenoiserParams merge(const DenoiserParams& base, const LoraAdapter& adapter, double scale) {
    check_lora(base, adapter);
    DenoiserParams out = base;
    if (scale == 0.0) return out;
    for (std::size_t i = 0; i < out.layers.size(); ++i)
        out.layers[i].weight = merge_weight(base.layers[i].weight, adapter.layers[i], scale);
    return out;
}

LoraAdapter lora_gradient(const LoraAdapter& adapter, const Gradient& merged_grad) {
    if (merged_grad.size() != adapter.layers.size())
        throw DimensionError("lora_gradient: layer count mismatch");
    LoraAdapter g;
    for (std::size_t li = 0; li < adapter.layers.size(); ++li) {
        const LoraLayer& l = adapter.layers[li];
        const Mat& dw = merged_grad[li].weight;
        const std::size_t out = l.up.rows(), in = l.down.cols(), r = l.rank();
        LoraLayer gl{Mat(r, in), Mat(out, r)};
        for (std::size_t i = 0; i < out; ++i)
            for (std::size_t k = 0; k < r; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < in; ++j) acc += dw(i, j) * l.down(k, j);
                gl.up(i, k) = acc;
            }
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t i = 0; i < out; ++i) {
                const double b = l.up(i, k);
                for (std::size_t j = 0; j < in; ++j) gl.down(k, j) += b * dw(i, j);
            }
        g.layers.push_back(std::move(gl));
    }
    return g;
}

std::vector<std::span<double>> parameter_blocks(LoraAdapter& adapter) {
    std::vector<std::span<double>> out;
    for (auto& l : adapter.layers) {
        out.emplace_back(l.down.data());
        out.emplace_back(l.up.data());
    }
    return out;
}

std::vector<std::span<const double>> parameter_blocks(const LoraAdapter& adapter) {
    std::vector<std::span<const double>> out;
    for (const auto& l : adapter.layers) {
        out.emplace_back(l.down.data());
        out.emplace_back(l.up.data());
    }
    return out;
}

}  // namespace pcm
