// pcm: command-line front end.
//
//   pcm <command> --config <file> [--seed N] [--method M] [--out DIR] [--threads N]
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O, 4 file format or
// checksum mismatch, 5 numerical failure, 6 internal error.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "pcm/bench.hpp"
#include "pcm/parallel.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kIo = 3, kFormat = 4, kNumeric = 5, kInternal = 6 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string method = "picard";
    std::string out = ".";
};

int run(const std::string& command, const Options& opt) {
    pcm::CommandContext ctx;
    ctx.cfg = pcm::load_config(opt.config);
    if (opt.seed) ctx.cfg.seed = *opt.seed;
    if (opt.threads) ctx.cfg.threads = *opt.threads;
    ctx.cfg.validate();
    ctx.out_dir = opt.out;
    ctx.log = &std::cerr;
    pcm::set_default_threads(ctx.cfg.threads);

    std::vector<std::filesystem::path> files;
    if (command == "train-base") files = pcm::cmd_train_base(ctx);
    else if (command == "gen-traj") files = pcm::cmd_gen_traj(ctx);
    else if (command == "train-pcm") files = pcm::cmd_train_pcm(ctx);
    else if (command == "sample") files = pcm::cmd_sample(ctx, pcm::parse_sample_method(opt.method));
    else if (command == "bench") files = pcm::cmd_bench(ctx);
    else if (command == "sweep-stiffness") files = pcm::cmd_sweep_stiffness(ctx);
    for (const auto& f : files) std::cout << f.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Picard consistency models on 2-D toy diffusion"};
    app.require_subcommand(1);
    Options opt;

    const std::pair<const char*, const char*> commands[] = {
        {"train-base", "Train the base noise predictor on the toy data set"},
        {"gen-traj", "Generate the Picard trajectory dataset from the base model"},
        {"train-pcm", "Picard consistency training (full weights or LoRA)"},
        {"sample", "Sample with one method and write samples and a convergence report"},
        {"bench", "Compare Picard, PCM with and without switching, and Newton"},
        {"sweep-stiffness", "One convergence curve per switching stiffness"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "INI configuration file")->required();
        sub->add_option("--seed", opt.seed, "Master seed (overrides [run] seed)");
        sub->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
        sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
        if (std::string(name) == "sample")
            sub->add_option("--method", opt.method,
                            "sequential | picard | pcm | pcm-lora | newton")
                ->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opt);
    } catch (const pcm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const pcm::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const pcm::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const pcm::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
