#include <cmath>

#include "doctest.h"
#include "pcm/parallel.hpp"
#include "pcm/solver.hpp"
#include "test_util.hpp"

using namespace pcm;

TEST_CASE("solver names round-trip") {
    CHECK(parse_solver_kind("ddim") == SolverKind::ddim);
    CHECK(parse_solver_kind("euler-eq10") == SolverKind::euler_eq10);
    CHECK(to_string(SolverKind::ddim) == "ddim");
    CHECK_THROWS_AS(parse_solver_kind("heun"), ConfigError);
}

TEST_CASE("euler increment is the prediction divided by T") {
    const auto p = test::small_net(25, 1);
    const auto step = StepFn::euler(25);
    const Vec x{0.3, -1.1};
    const Vec eps = predict(p, x, 4);
    const Vec inc = increment(step, p, x, 4);
    for (std::size_t i = 0; i < 2; ++i) CHECK(inc[i] == eps[i] / 25.0);
}

TEST_CASE("DDIM step matches the textbook update through the clean-data estimate") {
    const auto s = NoiseSchedule::cosine(20);
    const auto p = test::small_net(20, 2);
    const auto step = StepFn::ddim(s);
    SeededRng rng(3);
    for (std::size_t t = 1; t < 20; ++t) {
        const Vec x = gaussian(rng, 2);
        const Vec eps = predict(p, x, t);
        const double a = s.alpha(t), an = s.alpha(t + 1);
        const Vec inc = increment(step, p, x, t);
        for (std::size_t i = 0; i < 2; ++i) {
            const double x0_hat = (x[i] - std::sqrt(1 - a) * eps[i]) / std::sqrt(a);
            const double expected = std::sqrt(an) * x0_hat + std::sqrt(1 - an) * eps[i];
            CHECK(x[i] + inc[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    // alpha(0) = 0: the clean-data estimate is the origin.
    const Vec x{0.7, -0.4};
    const Vec eps = predict(p, x, 0);
    const Vec inc = increment(step, p, x, 0);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(x[i] + inc[i] == doctest::Approx(std::sqrt(1 - s.alpha(1)) * eps[i]).epsilon(1e-12));
}

TEST_CASE("increment JVP agrees with central differences") {
    const auto p = test::small_net(16, 4);
    SeededRng rng(5);
    for (auto step : {StepFn::euler(16), StepFn::ddim(p.schedule)}) {
        for (std::size_t t : {0u, 5u, 15u}) {
            const Vec x = gaussian(rng, 2), v = gaussian(rng, 2);
            const Vec j = increment_jvp(step, p, x, t, v);
            const double h = 1e-6;
            Vec xp = x, xm = x;
            for (std::size_t i = 0; i < 2; ++i) xp[i] += h * v[i], xm[i] -= h * v[i];
            const Vec a = increment(step, p, xp, t), b = increment(step, p, xm, t);
            Vec fd(2);
            for (std::size_t i = 0; i < 2; ++i) fd[i] = (a[i] - b[i]) / (2 * h);
            CHECK(test::rel_error(j, fd) <= 1e-4);
        }
    }
}

TEST_CASE("compound growth: eps_hat = x under the Euler solver") {
    const std::size_t T = 50;
    const auto p = test::affine_net(T, Mat::identity(2), 0);
    // Remove the time-dependent part so eps_hat(x, t) = x exactly.
    auto q = p;
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 2; c < q.input_dim(); ++c) q.layers[0].weight(r, c) = 0.0;
    q.layers[0].bias = {0.0, 0.0};
    const Trajectory X = sequential_sample(StepFn::euler(T), q, Vec{1.0, -2.0});
    const double g = std::pow(1.0 + 1.0 / T, double(T));
    CHECK(X.last()[0] == doctest::Approx(g).epsilon(1e-12));
    CHECK(X.last()[1] == doctest::Approx(-2.0 * g).epsilon(1e-12));
}

TEST_CASE("sweep of the sequential trajectory reproduces it bit-for-bit") {
    const auto p = test::small_net(30, 6);
    for (auto step : {StepFn::euler(30), StepFn::ddim(p.schedule)}) {
        const Trajectory seq = sequential_sample(step, p, Vec{0.5, 1.5});
        CHECK(phi_sweep(step, p, seq) == seq);
    }
}

TEST_CASE("sweep output does not depend on the worker count") {
    const auto p = test::small_net(40, 7);
    const auto step = StepFn::ddim(p.schedule);
    SeededRng rng(8);
    Trajectory X = Trajectory::constant(gaussian(rng, 2), 40);
    for (auto& pt : X.points) pt = gaussian(rng, 2);
    const Trajectory one = phi_sweep(step, p, X, 1);
    for (std::size_t threads : {2u, 3u, 7u, 64u}) CHECK(phi_sweep(step, p, X, threads) == one);
}

TEST_CASE("sweep keeps the initial point and rejects mismatched shapes") {
    const auto p = test::small_net(10, 9);
    const auto step = StepFn::ddim(p.schedule);
    const Trajectory X = Trajectory::constant(Vec{1.0, 2.0}, 10);
    CHECK(phi_sweep(step, p, X).initial() == Vec{1.0, 2.0});
    CHECK_THROWS_AS(phi_sweep(step, p, Trajectory::constant(Vec{1.0, 2.0}, 9)), DimensionError);
    CHECK_THROWS_AS(phi_sweep(StepFn::euler(11), p, X), DimensionError);
    CHECK_THROWS_AS(phi_sweep(step, p, Trajectory::constant(Vec{1.0}, 10)), DimensionError);
}
