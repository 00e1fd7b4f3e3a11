#include "doctest.h"
#include "pcm/switching.hpp"
#include "test_util.hpp"

using namespace pcm;

namespace {

LoraAdapter random_adapter(const DenoiserParams& base, std::uint64_t seed) {
    SeededRng rng(seed);
    LoraAdapter a = make_lora(base, 4, 0.3, rng);
    for (auto& l : a.layers)
        for (double& v : l.up.data()) v = 0.2 * rng.normal();
    return a;
}

Trajectory random_trajectory(std::size_t T, std::uint64_t seed) {
    SeededRng rng(seed);
    Trajectory X;
    for (std::size_t t = 0; t <= T; ++t) X.points.push_back(gaussian(rng, 2));
    return X;
}

}  // namespace

TEST_CASE("lambda schedule") {
    for (double s : {0.0, 2.0, 100.0}) CHECK(lambda_schedule(0, 30, s) == 1.0);
    CHECK(lambda_schedule(15, 30, 2) == 0.0);
    CHECK(lambda_schedule(6, 30, 2) == doctest::Approx(0.6));
    CHECK(lambda_schedule(40, 30, 2) == 0.0);
    CHECK(lambda_schedule(29, 30, 0) == 1.0);
    for (std::size_t k = 1; k < 40; ++k) CHECK(lambda_schedule(k, 30, 3) <= lambda_schedule(k - 1, 30, 3));
    SwitchConfig bad;
    bad.stiffness = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(parse_switch_mode(to_string(SwitchMode::lora)) == SwitchMode::lora);
    CHECK_THROWS_AS(parse_switch_mode("weights"), ConfigError);
}

TEST_CASE("feature mixing endpoints and midpoint") {
    const auto base = test::small_net(12, 1);
    const auto pcm = test::small_net(12, 2);
    const auto step = StepFn::ddim(base.schedule);
    const Trajectory X = random_trajectory(12, 3);
    const Trajectory a = phi_sweep(step, pcm, X), b = phi_sweep(step, base, X);
    CHECK(mixed_sweep_feature(pcm, base, step, X, 1.0) == a);
    CHECK(mixed_sweep_feature(pcm, base, step, X, 0.0) == b);
    const Trajectory m = mixed_sweep_feature(pcm, base, step, X, 0.5);
    for (std::size_t t = 0; t <= 12; ++t)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(m.points[t][i] == doctest::Approx((a.points[t][i] + b.points[t][i]) / 2).epsilon(1e-14));
}

TEST_CASE("LoRA mixing endpoints") {
    const auto base = test::small_net(12, 4);
    const auto step = StepFn::ddim(base.schedule);
    const LoraAdapter ad = random_adapter(base, 5);
    const Trajectory X = random_trajectory(12, 6);
    CHECK(mixed_sweep_lora(base, ad, step, X, 0.0) == phi_sweep(step, base, X));
    CHECK(mixed_sweep_lora(base, ad, step, X, 1.0) == phi_sweep(step, merge(base, ad, 1.0), X));
    SeededRng rng(7);
    const LoraAdapter fresh = make_lora(base, 4, 0.1, rng);
    for (double l : {0.0, 0.25, 1.0}) CHECK(mixed_sweep_lora(base, fresh, step, X, l) == phi_sweep(step, base, X));
}

TEST_CASE("a stiffness with lambda(1) = 0 is plain Picard from the first switch on") {
    const auto base = test::small_net(20, 8);
    const auto pcm = test::small_net(20, 9);
    const auto step = StepFn::ddim(base.schedule);
    const Vec x0{0.3, -0.8};
    PicardConfig cfg;
    cfg.max_iters = 20;
    cfg.tol = 0.0;
    cfg.keep_iterates = true;
    SwitchConfig sw;
    sw.K = 10;
    sw.stiffness = 10.0;  // lambda(1) = 0
    PcmModel m;
    m.full = pcm;
    const auto rep = run_pcm_inference(m, base, step, x0, sw, cfg);
    REQUIRE(rep.iterates.size() >= 2);
    CHECK(rep.iterates[1] == phi_sweep(step, pcm, rep.iterates[0]));
    for (std::size_t k = 1; k + 1 < rep.iterates.size(); ++k)
        CHECK(rep.iterates[k + 1] == phi_sweep(step, base, rep.iterates[k]));
    const Trajectory ref = sequential_sample(step, base, x0);
    CHECK(residual_linf(rep.final, ref) <= 1e-10);
}

TEST_CASE("switching restores convergence to the base fixed point") {
    const auto base = test::small_net(20, 10);
    const auto pcm = test::small_net(20, 11);
    const auto step = StepFn::ddim(base.schedule);
    PicardConfig cfg;
    cfg.max_iters = 60;
    cfg.tol = 1e-12;
    SwitchConfig sw;
    sw.K = 10;
    sw.stiffness = 2.0;
    PcmModel m;
    m.full = pcm;
    SeededRng rng(12);
    for (int s = 0; s < 3; ++s) {
        const Vec x0 = gaussian(rng, 2);
        const Trajectory ref = sequential_sample(step, base, x0);
        const auto rep = run_pcm_inference(m, base, step, x0, sw, cfg, &ref);
        CHECK(rep.converged);
        CHECK(rep.iterations >= 5);  // lambda reaches 0 at k = 5
        CHECK(rep.errors.back() <= 1e-10);

        // s = 0 never leaves the PCM and converges to its own fixed point.
        SwitchConfig pure = sw;
        pure.stiffness = 0.0;
        const auto p = run_pcm_inference(m, base, step, x0, pure, cfg, &ref);
        CHECK(residual_linf(p.final, sequential_sample(step, pcm, x0)) <= 1e-10);
        CHECK(p.errors.back() > 1e-6);
    }
}

TEST_CASE("sweeps count both models while they are mixed") {
    const auto base = test::small_net(10, 13);
    const auto pcm = test::small_net(10, 14);
    const auto step = StepFn::ddim(base.schedule);
    PicardConfig cfg;
    cfg.max_iters = 10;
    cfg.tol = 0.0;
    SwitchConfig sw;
    sw.K = 10;
    sw.stiffness = 2.0;  // lambda: 1, 0.8, 0.6, 0.4, 0.2, 0, ...
    PcmModel m;
    m.full = pcm;
    const auto rep = run_pcm_inference(m, base, step, Vec{1, 1}, sw, cfg);
    CHECK(rep.sweeps == rep.iterations + std::min<std::size_t>(rep.iterations - 1, 4));

    sw.mode = SwitchMode::lora;
    m.full.reset();
    m.adapter = random_adapter(base, 15);
    const auto lr = run_pcm_inference(m, base, step, Vec{1, 1}, sw, cfg);
    CHECK(lr.sweeps == lr.iterations);
}

TEST_CASE("feature and LoRA switching reach the same fixed point") {
    const auto base = test::small_net(20, 16);
    const auto step = StepFn::ddim(base.schedule);
    PcmModel m;
    m.adapter = random_adapter(base, 17);
    PicardConfig cfg;
    cfg.max_iters = 60;
    cfg.tol = 1e-12;
    SwitchConfig sw;
    sw.K = 10;
    sw.stiffness = 2.0;
    const Vec x0{-0.5, 1.2};
    const Trajectory ref = sequential_sample(step, base, x0);
    sw.mode = SwitchMode::feature;
    const auto f = run_pcm_inference(m, base, step, x0, sw, cfg, &ref);
    sw.mode = SwitchMode::lora;
    const auto l = run_pcm_inference(m, base, step, x0, sw, cfg, &ref);
    CHECK(f.converged);
    CHECK(l.converged);
    CHECK(residual_linf(f.final, l.final) <= 1e-10);
    CHECK(residual_linf(f.final, ref) <= 1e-10);
    // The mixed sweeps themselves differ in general.
    const Trajectory X = Trajectory::constant(x0, 20);
    CHECK(residual_linf(mixed_sweep_feature(merge(base, *m.adapter, 1.0), base, step, X, 0.5),
                        mixed_sweep_lora(base, *m.adapter, step, X, 0.5)) > 0);
}

TEST_CASE("mode none is plain Picard") {
    const auto base = test::small_net(10, 18);
    const auto step = StepFn::ddim(base.schedule);
    PicardConfig cfg;
    cfg.max_iters = 10;
    SwitchConfig sw;
    sw.mode = SwitchMode::none;
    const auto a = run_pcm_inference(PcmModel{}, base, step, Vec{0.1, 0.2}, sw, cfg);
    const auto b = run_picard(step, base, Vec{0.1, 0.2}, cfg);
    CHECK(a.final == b.final);
    CHECK(a.residuals == b.residuals);
}
