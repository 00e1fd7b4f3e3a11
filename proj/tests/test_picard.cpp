#include <cmath>

#include "doctest.h"
#include "pcm/picard.hpp"
#include "test_util.hpp"

using namespace pcm;

TEST_CASE("Picard converges to the sequential sample within T iterations") {
    const auto p = test::small_net(20, 1);
    for (auto step : {StepFn::euler(20), StepFn::ddim(p.schedule)}) {
        SeededRng rng(2);
        for (int s = 0; s < 5; ++s) {
            const Vec x0 = gaussian(rng, 2);
            const Trajectory ref = sequential_sample(step, p, x0);
            PicardConfig cfg;
            cfg.max_iters = 20;
            cfg.tol = 0.0;
            const auto rep = run_picard(step, p, x0, cfg, &ref);
            CHECK(residual_linf(rep.final, ref) <= 1e-10);
            CHECK(rep.iterations <= 20);
            CHECK(rep.sweeps == rep.iterations);
            CHECK(rep.errors.size() == rep.iterations);
            CHECK(rep.residuals.size() == rep.iterations);
        }
    }
}

TEST_CASE("after k sweeps the first k points equal the sequential prefix") {
    const auto p = test::small_net(30, 3);
    const auto step = StepFn::ddim(p.schedule);
    SeededRng rng(4);
    for (int s = 0; s < 4; ++s) {
        const Vec x0 = gaussian(rng, 2);
        for (std::size_t k : {1u, 5u, 10u, 25u}) CHECK(prefix_exactness(step, p, x0, k));
        CHECK_THROWS(prefix_exactness(step, p, x0, 31));
    }
}

TEST_CASE("stop on residual and determinism of the run") {
    const auto p = test::small_net(20, 5);
    const auto step = StepFn::ddim(p.schedule);
    PicardConfig cfg;
    cfg.max_iters = 50;
    cfg.tol = 1e-8;
    const Vec x0{0.4, -0.9};
    const auto a = run_picard(step, p, x0, cfg);
    const auto b = run_picard(step, p, x0, cfg);
    CHECK(a.converged);
    CHECK(a.residuals.back() < 1e-8);
    for (std::size_t k = 0; k + 1 < a.residuals.size(); ++k) CHECK(a.residuals[k] >= 1e-8);
    CHECK(a.residuals == b.residuals);
    CHECK(a.final == b.final);
    CHECK(a.errors.empty());
}

TEST_CASE("keep_iterates stores X^0..X^k") {
    const auto p = test::small_net(10, 6);
    const auto step = StepFn::euler(10);
    PicardConfig cfg;
    cfg.max_iters = 4;
    cfg.keep_iterates = true;
    cfg.tol = 0.0;
    const auto rep = run_picard(step, p, Vec{1.0, 0.0}, cfg);
    REQUIRE(rep.iterates.size() == rep.iterations + 1);
    CHECK(rep.iterates.front() == Trajectory::constant(Vec{1.0, 0.0}, 10));
    for (std::size_t k = 0; k < rep.iterations; ++k)
        CHECK(rep.iterates[k + 1] == phi_sweep(step, p, rep.iterates[k]));
}

TEST_CASE("error metrics") {
    Trajectory a{{Vec{0, 0}, Vec{1, 0}, Vec{3, 4}}};
    Trajectory b{{Vec{0, 0}, Vec{1, 1}, Vec{0, 0}}};
    CHECK(convergence_error(a, b, ErrorMetric::final_point_l2) == doctest::Approx(5.0));
    CHECK(convergence_error(a, b, ErrorMetric::trajectory_mean_l2) == doctest::Approx(3.0));
    CHECK(residual_linf(a, b) == 4.0);
    CHECK_THROWS_AS(residual_linf(a, Trajectory{{Vec{0, 0}}}), DimensionError);
    CHECK(parse_error_metric(to_string(ErrorMetric::trajectory_mean_l2)) ==
          ErrorMetric::trajectory_mean_l2);
    CHECK_THROWS_AS(parse_error_metric("max"), ConfigError);
}

TEST_CASE("iterations_to finds the first iteration at or below eps") {
    const std::vector<double> e{1.0, 0.5, 0.1, 0.2, 0.01};
    CHECK(iterations_to(e, 0.1) == 3u);
    CHECK(iterations_to(e, 2.0) == 1u);
    CHECK_FALSE(iterations_to(e, 0.001).has_value());
}

TEST_CASE("non-finite trajectories abort with the iteration index") {
    auto p = test::small_net(10, 7);
    p.layers.back().bias[0] = std::nan("");
    const auto step = StepFn::euler(10);
    PicardConfig cfg;
    cfg.max_iters = 10;
    try {
        run_picard(step, p, Vec{5.0, 5.0}, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.iteration >= 1);
    }
}

TEST_CASE("invalid Picard configuration") {
    PicardConfig cfg;
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.max_iters = 1;
    cfg.tol = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
