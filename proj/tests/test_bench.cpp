#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pcm/bench.hpp"
#include "pcm/checkpoint.hpp"
#include "pcm/svg.hpp"

using namespace pcm;
namespace fs = std::filesystem;

namespace {

MethodCurves curves(std::string name, std::vector<std::vector<double>> errors) {
    MethodCurves c;
    c.name = std::move(name);
    for (std::size_t s = 0; s < errors.size(); ++s) {
        c.seeds.push_back(s);
        c.residuals.push_back(errors[s]);
        c.iterations.push_back(errors[s].size());
    }
    c.errors = std::move(errors);
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const char* name) {
    const fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("method names") {
    for (auto m : {SampleMethod::sequential, SampleMethod::picard, SampleMethod::pcm,
                   SampleMethod::pcm_lora, SampleMethod::newton})
        CHECK(parse_sample_method(to_string(m)) == m);
    CHECK(to_string(SampleMethod::pcm_lora) == "pcm-lora");
    CHECK_THROWS_AS(parse_sample_method("ddpm"), ConfigError);
}

TEST_CASE("iterations to eps with padding and unreached runs") {
    const auto c = curves("m", {{1.0, 0.1, 0.01}, {1.0, 0.5}});
    CHECK(c.padded_errors(1, 4) == std::vector<double>{1.0, 0.5, 0.5, 0.5});
    const auto r = mean_iterations_to(c, 0.1, 10);
    CHECK(r.mean == doctest::Approx((2 + 11) / 2.0));
    CHECK(r.unreached == 1);
    const auto q = mean_iterations_to(c, std::vector<double>{0.01, 0.5}, 10);
    CHECK(q.mean == doctest::Approx((3 + 2) / 2.0));
    CHECK(q.unreached == 0);
}

TEST_CASE("acceleration uses Picard's error at k_ref per seed") {
    const auto picard = curves("picard", {{1, 0.5, 0.25, 0.125}, {1, 0.1, 0.01, 0.001}});
    const auto fast = curves("fast", {{0.3, 0.2}, {0.05, 0.005}});
    const auto a = acceleration(fast, picard, 2, 10);
    REQUIRE(a.eps.size() == 2);
    CHECK(a.eps[0] == 0.5);
    CHECK(a.eps[1] == 0.1);
    CHECK(a.picard_mean == 2.0);
    CHECK(a.method_mean == 1.0);
    CHECK(a.ratio == 0.5);
    CHECK(a.unreached == 0);
}

TEST_CASE("transition detection") {
    const auto t = transition({1.0, 0.1, 0.01, 0.02, 0.02}, 1e-3);
    CHECK(t.has_transition);
    CHECK(t.plateau_above_tol);
    CHECK(t.argmin_k == 3);
    CHECK(t.min_error == 0.01);
    CHECK(t.final_error == 0.02);
    const auto mono = transition({1.0, 0.1, 1e-4}, 1e-3);
    CHECK_FALSE(mono.has_transition);
    CHECK_FALSE(mono.plateau_above_tol);
}

TEST_CASE("SVG line plot") {
    PlotSpec spec;
    spec.title = "a < b & c";
    spec.comment = "x -- y";
    spec.guide = 1e-3;
    const std::string svg =
        line_plot(spec, {Series{"one", {1, 2, 3}, {1, 1e-2, 0}}, Series{"two", {1, 2}, {0.5, 0.1}}});
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
    CHECK(svg.find("x - - y") != std::string::npos);
    CHECK(svg.find("one") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(line_plot(spec, {Series{"one", {1, 2, 3}, {1, 1e-2, 0}}, Series{"two", {1, 2}, {0.5, 0.1}}}) == svg);
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, 0.1, 1e-300, 123456.789, -2.5e-17})
        CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("bench with zero networks: every method converges at the first iteration") {
    const fs::path dir = fresh_dir("pcm_test_bench_zero");
    CommandContext ctx;
    ctx.out_dir = dir;
    ctx.cfg.T = 12;
    ctx.cfg.K = 6;
    ctx.cfg.max_iters = 12;
    ctx.cfg.solver = SolverKind::euler_eq10;
    ctx.cfg.seeds = {0, 1, 2};
    const DenoiserParams zero = make_zero_denoiser(ctx.cfg.mlp_shape(), ctx.cfg.make_schedule());
    save_checkpoint(zero, ctx.resolve(ctx.cfg.base_path));
    save_checkpoint(zero, ctx.resolve(ctx.cfg.ema_path));

    const auto files = cmd_bench(ctx);
    CHECK(files.size() >= 3);
    const auto j = nlohmann::json::parse(slurp(dir / "bench.json"));
    CHECK(j["schema"] == kSummarySchema);
    for (const auto& [name, m] : j["methods"].items()) {
        INFO(name);
        CHECK(m["iterations_to_tol_mean"].get<double>() == 1.0);
        CHECK(m["final_error_max"].get<double>() == 0.0);
    }
    // Every error in the curve file is exactly zero.
    std::istringstream csv(slurp(dir / "bench.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("method", 0) == 0) continue;
        CHECK(line.substr(line.rfind(',') + 1) == "0");
        ++rows;
    }
    CHECK(rows >= 4 * 3);
    fs::remove_all(dir);
}

TEST_CASE("sequential and Picard sampling agree and outputs are reproducible") {
    const fs::path dir = fresh_dir("pcm_test_bench_sample");
    CommandContext ctx;
    ctx.out_dir = dir;
    ctx.cfg.T = 10;
    ctx.cfg.max_iters = 10;
    ctx.cfg.seeds = {3, 4};
    SeededRng rng(5);
    MlpShape shape = ctx.cfg.mlp_shape();
    shape.hidden = {16, 16, 16};
    ctx.cfg.width = 16;
    save_checkpoint(make_denoiser(shape, ctx.cfg.make_schedule(), rng),
                    ctx.resolve(ctx.cfg.base_path));

    cmd_sample(ctx, SampleMethod::sequential);
    cmd_sample(ctx, SampleMethod::picard);
    const std::string first = slurp(dir / "samples_picard.csv");
    cmd_sample(ctx, SampleMethod::picard);
    CHECK(slurp(dir / "samples_picard.csv") == first);

    const auto m = load_models(ctx, false, false);
    const auto seq = run_method_curves("seq", ctx.cfg, m, SampleMethod::sequential, 0);
    const auto pic = run_method_curves("pic", ctx.cfg, m, SampleMethod::picard, 0);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(std::abs(seq.finals[s][i] - pic.finals[s][i]) <= 1e-10);

    ctx.cfg.T = 11;
    CHECK_THROWS_AS(load_models(ctx, false, false), FormatError);
    fs::remove_all(dir);
}
