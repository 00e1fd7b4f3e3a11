#include "doctest.h"
#include "pcm/config.hpp"

using namespace pcm;

TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.T == 50);
    CHECK(c.K == 30);
    CHECK(c.solver == SolverKind::ddim);
    CHECK(c.ema_decay == 0.999);
    CHECK(c.tol == 1e-3);
    CHECK(c.seeds.size() == 10);
    CHECK(c.make_schedule() == NoiseSchedule::cosine(50));
    CHECK_NOTHROW(c.validate());
    CHECK(parse_config("") == c);
}

TEST_CASE("canonical INI round-trips") {
    RunConfig c;
    c.T = 20;
    c.K = 10;
    c.tol = 2.5e-4;
    c.pct_lr = 3e-4;
    c.seeds = {4, 9, 11};
    c.stiffness_list = {0, 1.5, 3};
    c.alpha_mode = AlphaMode::flat;
    c.switch_mode = SwitchMode::lora;
    c.use_lora = true;
    c.solver = SolverKind::euler_eq10;
    c.task = ToyKind::two_moons;
    c.base_path = "models/b.ckpt";
    const std::string text = to_ini(c);
    CHECK(parse_config(text) == c);
    CHECK(to_ini(parse_config(text)) == text);
}

TEST_CASE("partial files override only the keys they name") {
    const RunConfig c = parse_config(
        "; comment\n[model]\nT = 20\nsolver = euler-eq10\n\n[sampler]\nseeds = 1, 2,3\n"
        "[pct]\nK = 10\nalpha_mode = empirical\nuse_lora = true\n");
    CHECK(c.T == 20);
    CHECK(c.solver == SolverKind::euler_eq10);
    CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(c.alpha_mode == AlphaMode::empirical);
    CHECK(c.use_lora);
    CHECK(c.K == 10);
    CHECK(c.N == RunConfig{}.N);
}

TEST_CASE("invalid files are configuration errors") {
    CHECK_THROWS_AS(parse_config("[model]\nT = 50\nwidht = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nT = 20\n"), ConfigError);  // K = 30 > T
    CHECK_THROWS_AS(parse_config("[modle]\nT = 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("T = 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nT = twenty\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nT = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nn = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[pct]\nema_decay = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[pct]\nK = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nsolver = rk4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sampler]\nseeds =\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model\nT = 3\n"), ConfigError);
}

TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_config("/nonexistent/pcm.ini"), IoError);
}

TEST_CASE("derived seeds are distinct streams") {
    RunConfig a, b;
    b.seed = 1;
    CHECK(a.init_seed() != a.data_seed());
    CHECK(a.dataset_seed() != a.heldout_seed());
    CHECK(a.init_seed() != b.init_seed());
    CHECK(a.noise(3) == a.noise(3));
    CHECK(a.noise(3) != a.noise(4));
    CHECK(a.noise(3) != b.noise(3));
    CHECK(a.noise(0).size() == 2);
}
