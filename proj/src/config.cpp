#include "pcm/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pcm {
namespace {

namespace pt = boost::property_tree;

std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) s += fmt_double(xs[i]);
        else s += std::to_string(xs[i]);
    }
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!tree_) return;
        auto v = tree_->get_optional<std::string>(key);
        if (!v) return;
        out = convert<T>(key, trim(*v));
    }

    template <class T, class Parse>
    void get_with(const char* key, T& out, Parse parse) {
        seen_.insert(key);
        if (!tree_) return;
        auto v = tree_->get_optional<std::string>(key);
        if (v) out = parse(trim(*v));
    }

    template <class T>
    void get_list(const char* key, std::vector<T>& out) {
        seen_.insert(key);
        if (!tree_) return;
        auto v = tree_->get_optional<std::string>(key);
        if (!v) return;
        out.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) out.push_back(convert<T>(key, trim(item)));
    }

    void reject_unknown() const {
        if (!tree_) return;
        for (const auto& [k, _] : *tree_)
            if (!seen_.count(k)) throw ConfigError("unknown key '" + name_ + "." + k + "'");
    }

private:
    template <class T>
    T convert(const char* key, const std::string& s) const {
        T v{};
        if constexpr (std::is_same_v<T, std::string>) {
            return s;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (s == "true" || s == "1" || s == "yes") return true;
            if (s == "false" || s == "0" || s == "no") return false;
            bad(key, s);
        } else {
            if constexpr (std::is_unsigned_v<T>)
                if (!s.empty() && s.front() == '-') bad(key, s);
            auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || end != s.data() + s.size()) bad(key, s);
        }
        return v;
    }
    [[noreturn]] void bad(const char* key, const std::string& s) const {
        throw ConfigError("invalid value '" + s + "' for " + name_ + "." + key);
    }

    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void RunConfig::validate() const {
    require(data_count >= 16, "task.count must be >= 16");
    require(n >= 1, "model.n must be >= 1");
    require(n == 2, "model.n must be 2 for the toy data sets");
    require(T >= 1 && T <= 10000, "model.T must lie in [1, 10000]");
    require(width >= 1 && depth >= 1, "model.width and model.depth must be >= 1");
    require(embed_freqs <= 16, "model.embed_freqs must be <= 16");
    require(schedule == "cosine" || schedule == "linear", "model.schedule must be cosine or linear");
    require(base_batch >= 1, "base.batch must be >= 1");
    require(base_lr >= 0.0, "base.lr must be >= 0");
    require(max_iters >= 1, "sampler.max_iters must be >= 1");
    require(tol > 0.0, "sampler.tol must be > 0");
    require(stop_tol >= 0.0, "sampler.stop_tol must be >= 0");
    require(!seeds.empty(), "sampler.seeds must not be empty");
    require(N >= 1, "pct.N must be >= 1");
    require(K >= 1 && K <= T, "pct.K must lie in [1, T]");
    require(pct_batch >= 1, "pct.batch must be >= 1");
    require(pct_lr >= 0.0, "pct.lr must be >= 0");
    require(ema_decay >= 0.0 && ema_decay <= 1.0, "pct.ema_decay must lie in [0, 1]");
    require(lora_rank >= 1, "pct.lora_rank must be >= 1");
    require(heldout_records >= 1, "pct.heldout must be >= 1");
    require(stiffness >= 0.0, "switch.stiffness must be >= 0");
    for (double s : stiffness_list) require(s >= 0.0, "switch.stiffness_list entries must be >= 0");
    require(!stiffness_list.empty(), "switch.stiffness_list must not be empty");
    require(!base_path.empty() && !dataset_path.empty() && !pcm_path.empty() &&
                !ema_path.empty() && !lora_path.empty() && !lora_ema_path.empty(),
            "paths entries must not be empty");
}

NoiseSchedule RunConfig::make_schedule() const {
    return schedule == "linear" ? NoiseSchedule::linear(T) : NoiseSchedule::cosine(T);
}

MlpShape RunConfig::mlp_shape() const {
    MlpShape s;
    s.state_dim = n;
    s.embed_freqs = embed_freqs;
    s.hidden.assign(depth, width);
    return s;
}

StepFn RunConfig::make_step() const { return StepFn::make(solver, make_schedule()); }

PicardConfig RunConfig::picard() const {
    PicardConfig c;
    c.max_iters = max_iters;
    c.tol = stop_tol;
    c.metric = metric;
    c.threads = threads;
    return c;
}

SwitchConfig RunConfig::switching() const { return switching(stiffness); }

SwitchConfig RunConfig::switching(double s) const {
    SwitchConfig c;
    c.stiffness = s;
    c.K = K;
    c.mode = switch_mode;
    return c;
}

std::uint64_t RunConfig::init_seed() const { return mix_seed(seed, 1); }
std::uint64_t RunConfig::data_seed() const { return mix_seed(seed, 2); }
std::uint64_t RunConfig::dataset_seed() const { return mix_seed(seed, 3); }
std::uint64_t RunConfig::heldout_seed() const { return mix_seed(seed, 4); }
std::uint64_t RunConfig::pct_seed() const { return mix_seed(seed, 5); }

Vec RunConfig::noise(std::uint64_t s) const {
    SeededRng rng(mix_seed(mix_seed(seed, 6), s));
    return gaussian(rng, n);
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }

    static const std::set<std::string> sections = {"task", "model", "base", "sampler",
                                                   "pct",  "switch", "paths", "run"};
    for (const auto& [name, sub] : tree) {
        if (!sections.count(name)) throw ConfigError("unknown section '" + name + "'");
        if (sub.empty() && !sub.data().empty())
            throw ConfigError("key '" + name + "' outside any section");
    }
    auto section = [&](const char* name) {
        return Section(tree.get_child_optional(name).get_ptr(), name);
    };

    RunConfig c;
    {
        auto s = section("task");
        s.get_with("dataset", c.task, parse_toy_kind);
        s.get("count", c.data_count);
        s.reject_unknown();
    }
    {
        auto s = section("model");
        s.get("n", c.n);
        s.get("T", c.T);
        s.get("width", c.width);
        s.get("depth", c.depth);
        s.get("embed_freqs", c.embed_freqs);
        s.get("schedule", c.schedule);
        s.get_with("solver", c.solver, parse_solver_kind);
        s.reject_unknown();
    }
    {
        auto s = section("base");
        s.get("epochs", c.base_epochs);
        s.get("batch", c.base_batch);
        s.get("lr", c.base_lr);
        s.reject_unknown();
    }
    {
        auto s = section("sampler");
        s.get("max_iters", c.max_iters);
        s.get("tol", c.tol);
        s.get("stop_tol", c.stop_tol);
        s.get_with("metric", c.metric, parse_error_metric);
        s.get_list("seeds", c.seeds);
        s.reject_unknown();
    }
    {
        auto s = section("pct");
        s.get("N", c.N);
        s.get("K", c.K);
        s.get("iterations", c.pct_iterations);
        s.get("batch", c.pct_batch);
        s.get("lr", c.pct_lr);
        s.get("ema_decay", c.ema_decay);
        s.get_with("alpha_mode", c.alpha_mode, parse_alpha_mode);
        s.get("use_lora", c.use_lora);
        s.get("lora_rank", c.lora_rank);
        s.get("select_every", c.select_every);
        s.get("heldout", c.heldout_records);
        s.reject_unknown();
    }
    {
        auto s = section("switch");
        s.get("stiffness", c.stiffness);
        s.get_with("mode", c.switch_mode, parse_switch_mode);
        s.get_list("stiffness_list", c.stiffness_list);
        s.reject_unknown();
    }
    {
        auto s = section("paths");
        s.get("base", c.base_path);
        s.get("dataset", c.dataset_path);
        s.get("pcm", c.pcm_path);
        s.get("pcm_ema", c.ema_path);
        s.get("lora", c.lora_path);
        s.get("lora_ema", c.lora_ema_path);
        s.reject_unknown();
    }
    {
        auto s = section("run");
        s.get("seed", c.seed);
        s.get("threads", c.threads);
        s.reject_unknown();
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading config '" + path.string() + "'");
    return parse_config(ss.str());
}

std::string to_ini(const RunConfig& c) {
    std::ostringstream o;
    o << "[task]\n"
      << "dataset = " << to_string(c.task) << "\n"
      << "count = " << c.data_count << "\n"
      << "[model]\n"
      << "n = " << c.n << "\n"
      << "T = " << c.T << "\n"
      << "width = " << c.width << "\n"
      << "depth = " << c.depth << "\n"
      << "embed_freqs = " << c.embed_freqs << "\n"
      << "schedule = " << c.schedule << "\n"
      << "solver = " << to_string(c.solver) << "\n"
      << "[base]\n"
      << "epochs = " << c.base_epochs << "\n"
      << "batch = " << c.base_batch << "\n"
      << "lr = " << fmt_double(c.base_lr) << "\n"
      << "[sampler]\n"
      << "max_iters = " << c.max_iters << "\n"
      << "tol = " << fmt_double(c.tol) << "\n"
      << "stop_tol = " << fmt_double(c.stop_tol) << "\n"
      << "metric = " << to_string(c.metric) << "\n"
      << "seeds = " << join(c.seeds) << "\n"
      << "[pct]\n"
      << "N = " << c.N << "\n"
      << "K = " << c.K << "\n"
      << "iterations = " << c.pct_iterations << "\n"
      << "batch = " << c.pct_batch << "\n"
      << "lr = " << fmt_double(c.pct_lr) << "\n"
      << "ema_decay = " << fmt_double(c.ema_decay) << "\n"
      << "alpha_mode = " << to_string(c.alpha_mode) << "\n"
      << "use_lora = " << (c.use_lora ? "true" : "false") << "\n"
      << "lora_rank = " << c.lora_rank << "\n"
      << "select_every = " << c.select_every << "\n"
      << "heldout = " << c.heldout_records << "\n"
      << "[switch]\n"
      << "stiffness = " << fmt_double(c.stiffness) << "\n"
      << "mode = " << to_string(c.switch_mode) << "\n"
      << "stiffness_list = " << join(c.stiffness_list) << "\n"
      << "[paths]\n"
      << "base = " << c.base_path << "\n"
      << "dataset = " << c.dataset_path << "\n"
      << "pcm = " << c.pcm_path << "\n"
      << "pcm_ema = " << c.ema_path << "\n"
      << "lora = " << c.lora_path << "\n"
      << "lora_ema = " << c.lora_ema_path << "\n"
      << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "threads = " << c.threads << "\n";
    return o.str();
}

}  // namespace pcm
