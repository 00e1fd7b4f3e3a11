#pragma once

// Low-rank adapters W = W0 + scale * B A attached to every linear layer.

#include <cstddef>
#include <vector>

#include "pcm/denoiser.hpp"

namespace pcm {

struct LoraLayer {
    Mat down;  // A: rank x in
    Mat up;    // B: out x rank

    std::size_t rank() const { return down.rows(); }
    bool operator==(const LoraLayer&) const = default;
};

/// One entry per base layer. A layer whose min(in, out) <= 1 cannot carry a
/// rank r < min(in, out) adapter and is left unadapted (rank 0).
struct LoraAdapter {
    std::vector<LoraLayer> layers;

    std::size_t parameter_count() const;
    bool operator==(const LoraAdapter&) const = default;
};

/// Rank per layer is min(rank, min(in, out) - 1). A ~ N(0, init_std^2), B = 0.
LoraAdapter make_lora(const DenoiserParams& base, std::size_t rank, double init_std,
                      SeededRng& rng);

/// Throws DimensionError if the adapter does not fit `base`.
void check_lora(const DenoiserParams& base, const LoraAdapter& adapter);

/// B * A
Mat lora_delta(const LoraLayer& layer);

/// W0 + scale * B A. Entries where B A is exactly zero keep W0's bits, and
/// scale == 0 returns W0 unchanged.
Mat merge_weight(const Mat& w0, const LoraLayer& layer, double scale);

/// (W0 + scale * B A) x through the merged weight.
Vec lora_forward(const Mat& w0, const LoraLayer& layer, std::span<const double> x, double scale);

/// Base parameters with every adapted weight merged at `scale`.
DenoiserParams merge(const DenoiserParams& base, const LoraAdapter& adapter, double scale);

/// Chain rule from a gradient w.r.t. merged weights (at scale 1) to the
/// adapter: dB = dW A^T, dA = B^T dW.
LoraAdapter lora_gradient(const LoraAdapter& adapter, const Gradient& merged_grad);

std::vector<std::span<double>> parameter_blocks(LoraAdapter& adapter);
std::vector<std::span<const double>> parameter_blocks(const LoraAdapter& adapter);

}  // namespace pcm
