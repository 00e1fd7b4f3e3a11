#include "doctest.h"
#include "pcm/checkpoint.hpp"
#include "pcm/lora.hpp"
#include "pcm/pct.hpp"
#include "test_util.hpp"

using namespace pcm;

namespace {

LoraAdapter random_adapter(const DenoiserParams& base, std::size_t rank, std::uint64_t seed) {
    SeededRng rng(seed);
    LoraAdapter a = make_lora(base, rank, 0.3, rng);
    for (auto& l : a.layers)
        for (double& v : l.up.data()) v = 0.3 * rng.normal();
    return a;
}

}  // namespace

TEST_CASE("adapter ranks and initial state") {
    const auto base = test::small_net(10, 1);
    SeededRng rng(2);
    const LoraAdapter a = make_lora(base, 4, 0.1, rng);
    REQUIRE(a.layers.size() == base.layers.size());
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const Mat& w = base.layers[l].weight;
        const std::size_t expect = std::min<std::size_t>(4, std::min(w.rows(), w.cols()) - 1);
        CHECK(a.layers[l].rank() == expect);
        CHECK(a.layers[l].down.cols() == w.cols());
        CHECK(a.layers[l].up.rows() == w.rows());
        for (double v : a.layers[l].up.data()) CHECK(v == 0.0);
    }
    check_lora(base, a);
    CHECK_THROWS_AS(check_lora(test::small_net(10, 1, 8), a), DimensionError);
}

TEST_CASE("scale 0 and a fresh adapter leave every weight bit-identical") {
    const auto base = test::small_net(10, 3);
    SeededRng rng(4);
    const LoraAdapter fresh = make_lora(base, 4, 0.1, rng);
    const LoraAdapter trained = random_adapter(base, 4, 5);
    for (double s : {0.0, 0.3, 1.0, 7.5}) CHECK(merge(base, fresh, s) == base);
    CHECK(merge(base, trained, 0.0) == base);

    SeededRng xr(6);
    const Vec x = gaussian(xr, base.layers[1].weight.cols());
    const Vec ref = matvec(base.layers[1].weight, x);
    CHECK(lora_forward(base.layers[1].weight, trained.layers[1], x, 0.0) == ref);
    CHECK(lora_forward(base.layers[1].weight, fresh.layers[1], x, 0.8) == ref);
}

TEST_CASE("scale 1 equals the fully fine-tuned layer") {
    const auto base = test::small_net(10, 7);
    const LoraAdapter a = random_adapter(base, 3, 8);
    const auto& L = a.layers[1];
    const Mat& w0 = base.layers[1].weight;
    SeededRng xr(9);
    const Vec x = gaussian(xr, w0.cols());
    const Vec y = lora_forward(w0, L, x, 1.0);
    for (std::size_t r = 0; r < w0.rows(); ++r) {
        long double acc = 0;
        for (std::size_t c = 0; c < w0.cols(); ++c) {
            long double wc = w0(r, c);
            for (std::size_t k = 0; k < L.rank(); ++k)
                wc += static_cast<long double>(L.up(r, k)) * L.down(k, c);
            acc += wc * x[c];
        }
        CHECK(y[r] == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
    }
    const DenoiserParams merged = merge(base, a, 1.0);
    for (std::size_t l = 0; l < base.layers.size(); ++l)
        CHECK(merged.layers[l].weight == merge_weight(base.layers[l].weight, a.layers[l], 1.0));
}

TEST_CASE("adapter gradient agrees with central differences through a sweep") {
    const auto base = test::small_net(6, 10);
    const auto data = generate_dataset(base, StepFn::ddim(base.schedule), 1, 3, 11);
    LoraAdapter a = random_adapter(base, 3, 12);
    const auto step = StepFn::ddim(base.schedule);
    auto f = [&] { return pct_loss(merge(base, a, 1.0), data.records[0], 1, step, 1.0); };
    const auto lg = pct_loss_grad(merge(base, a, 1.0), data.records[0], 1, step, 1.0);
    LoraAdapter g = lora_gradient(a, lg.grad);
    auto blocks = parameter_blocks(a);
    auto grads = parameter_blocks(g);
    REQUIRE(blocks.size() == grads.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].empty()) continue;
        const Vec fd = test::central_diff(blocks[b], f);
        CHECK(test::rel_error(grads[b], fd) <= 1e-4);
    }
}

TEST_CASE("adapter files round-trip and are tied to their base") {
    const auto base = test::small_net(10, 13);
    const LoraAdapter a = random_adapter(base, 4, 14);
    const Bytes bytes = serialize(a, checksum(base));
    const auto [back, sum] = deserialize_lora(bytes);
    CHECK(back == a);
    CHECK(sum == checksum(base));
    CHECK(serialize(back, sum) == bytes);

    const auto dir = std::filesystem::temp_directory_path() / "pcm_test_lora";
    std::filesystem::create_directories(dir);
    save_lora(a, checksum(base), dir / "a.lora");
    CHECK(load_lora(dir / "a.lora", base) == a);
    CHECK_THROWS_AS(load_lora(dir / "a.lora", test::small_net(10, 99)), FormatError);
    std::filesystem::remove_all(dir);
}
