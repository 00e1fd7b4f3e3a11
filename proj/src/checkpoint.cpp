#include "pcm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string_view>

namespace pcm {
namespace {

constexpr std::string_view kModelMagic = "PCMW";
constexpr std::string_view kLoraMagic = "PCML";
constexpr std::string_view kDatasetMagic = "PCTD";

// Guards against absurd header values before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
public:
    void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> vs) {
        for (double v : vs) f64(v);
    }

    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string_view what) : in_(bytes), what_(what) {}

    void magic(std::string_view m) {
        need(m.size());
        if (std::memcmp(in_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError(std::string(what_) + ": bad magic (expected '" + std::string(m) + "')");
        pos_ += m.size();
    }
    void version() {
        const std::uint32_t v = u32();
        if (v != kFormatVersion)
            throw FormatError(std::string(what_) + ": unsupported version " + std::to_string(v));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void f64s(std::span<double> out) {
        need(8 * out.size());
        for (double& v : out) v = f64();
    }
    Vec vec(std::uint64_t n) {
        need_elements(n);
        Vec v(n);
        f64s(v);
        return v;
    }
    void need_elements(std::uint64_t n) {
        if (n > kMaxElements || n * 8 > in_.size() - pos_) truncated();
    }
    void finish() {
        if (pos_ != in_.size())
            throw FormatError(std::string(what_) + ": " + std::to_string(in_.size() - pos_) +
                              " trailing bytes");
    }

private:
    void need(std::size_t n) {
        if (in_.size() - pos_ < n) truncated();
    }
    [[noreturn]] void truncated() { throw FormatError(std::string(what_) + ": truncated file"); }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::string_view what_;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Model

Bytes serialize(const DenoiserParams& params) {
    params.validate();
    Writer w;
    w.magic(kModelMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(params.state_dim));
    w.u32(static_cast<std::uint32_t>(params.steps()));
    w.u32(static_cast<std::uint32_t>(params.embed_freqs));
    w.u32(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        w.u32(static_cast<std::uint32_t>(l.weight.cols()));
        w.u32(static_cast<std::uint32_t>(l.weight.rows()));
        w.u32(static_cast<std::uint32_t>(l.activation));
    }
    for (const auto& l : params.layers) {
        w.f64s(l.weight.data());
        w.f64s(l.bias);
    }
    w.f64s(params.schedule.alphas());
    return w.take();
}

DenoiserParams deserialize_denoiser(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "checkpoint");
    r.magic(kModelMagic);
    r.version();
    DenoiserParams p;
    p.state_dim = r.u32();
    const std::uint32_t T = r.u32();
    p.embed_freqs = r.u32();
    const std::uint32_t count = r.u32();
    r.need_elements(count);
    struct Dims {
        std::uint32_t in, out, act;
    };
    std::vector<Dims> dims(count);
    for (auto& d : dims) {
        d.in = r.u32();
        d.out = r.u32();
        d.act = r.u32();
        if (d.act > static_cast<std::uint32_t>(Activation::silu))
            throw FormatError("checkpoint: unknown activation tag " + std::to_string(d.act));
    }
    for (const auto& d : dims) {
        Layer l;
        const std::uint64_t elems = std::uint64_t{d.in} * d.out;
        l.weight = Mat(d.out, d.in, r.vec(elems));
        l.bias = r.vec(d.out);
        l.activation = static_cast<Activation>(d.act);
        p.layers.push_back(std::move(l));
    }
    Vec alpha = r.vec(std::uint64_t{T} + 1);
    r.finish();
    try {
        p.schedule = NoiseSchedule(std::move(alpha));
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return p;
}

std::uint64_t checksum(const DenoiserParams& params) { return fnv1a64(serialize(params)); }

// ---------------------------------------------------------------------------
// LoRA

Bytes serialize(const LoraAdapter& adapter, std::uint64_t base_checksum) {
    Writer w;
    w.magic(kLoraMagic);
    w.u32(kFormatVersion);
    w.u64(base_checksum);
    w.u32(static_cast<std::uint32_t>(adapter.layers.size()));
    for (const auto& l : adapter.layers) {
        w.u32(static_cast<std::uint32_t>(l.rank()));
        w.u32(static_cast<std::uint32_t>(l.down.cols()));
        w.u32(static_cast<std::uint32_t>(l.up.rows()));
    }
    for (const auto& l : adapter.layers) {
        w.f64s(l.down.data());
        w.f64s(l.up.data());
    }
    return w.take();
}

std::pair<LoraAdapter, std::uint64_t> deserialize_lora(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "lora adapter");
    r.magic(kLoraMagic);
    r.version();
    const std::uint64_t base = r.u64();
    const std::uint32_t count = r.u32();
    r.need_elements(count);
    struct Dims {
        std::uint32_t rank, in, out;
    };
    std::vector<Dims> dims(count);
    for (auto& d : dims) {
        d.rank = r.u32();
        d.in = r.u32();
        d.out = r.u32();
    }
    LoraAdapter a;
    for (const auto& d : dims) {
        LoraLayer l;
        l.down = Mat(d.rank, d.in, r.vec(std::uint64_t{d.rank} * d.in));
        l.up = Mat(d.out, d.rank, r.vec(std::uint64_t{d.out} * d.rank));
        a.layers.push_back(std::move(l));
    }
    r.finish();
    return {std::move(a), base};
}

// ---------------------------------------------------------------------------
// Dataset

Bytes serialize(const TrajectoryDataset& data) {
    const auto& h = data.header;
    if (data.records.size() != h.N) throw DimensionError("dataset: record count != header N");
    Writer w;
    w.magic(kDatasetMagic);
    w.u32(kFormatVersion);
    w.u32(h.N);
    w.u32(h.T);
    w.u32(h.K);
    w.u32(h.n);
    w.u32(static_cast<std::uint32_t>(h.solver));
    w.u64(h.base_checksum);
    for (const auto& rec : data.records) {
        if (rec.x0.size() != h.n || rec.history.size() != std::size_t{h.K} + 1)
            throw DimensionError("dataset: record shape does not match header");
        w.u64(rec.seed);
        w.f64s(rec.x0);
        for (const auto& X : rec.history) {
            if (X.points.size() != std::size_t{h.T} + 1)
                throw DimensionError("dataset: trajectory length does not match header");
            for (const auto& p : X.points) {
                if (p.size() != h.n) throw DimensionError("dataset: state dim mismatch");
                w.f64s(p);
            }
        }
    }
    return w.take();
}

TrajectoryDataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "trajectory dataset");
    r.magic(kDatasetMagic);
    r.version();
    TrajectoryDataset ds;
    auto& h = ds.header;
    h.N = r.u32();
    h.T = r.u32();
    h.K = r.u32();
    h.n = r.u32();
    const std::uint32_t solver = r.u32();
    if (solver > static_cast<std::uint32_t>(SolverKind::ddim))
        throw FormatError("trajectory dataset: unknown solver tag " + std::to_string(solver));
    h.solver = static_cast<SolverKind>(solver);
    h.base_checksum = r.u64();

    const std::uint64_t per_record =
        1 + std::uint64_t{h.n} + (std::uint64_t{h.K} + 1) * (std::uint64_t{h.T} + 1) * h.n;
    r.need_elements(per_record * h.N);
    ds.records.resize(h.N);
    for (auto& rec : ds.records) {
        rec.seed = r.u64();
        rec.x0 = r.vec(h.n);
        rec.history.resize(std::size_t{h.K} + 1);
        for (auto& X : rec.history) {
            X.points.resize(std::size_t{h.T} + 1);
            for (auto& p : X.points) p = r.vec(h.n);
        }
    }
    r.finish();
    return ds;
}

// ---------------------------------------------------------------------------
// Files

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return b;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path) {
    write_file(path, serialize(params));
}

DenoiserParams load_checkpoint(const std::filesystem::path& path) {
    return deserialize_denoiser(read_file(path));
}

void save_lora(const LoraAdapter& adapter, std::uint64_t base_checksum,
               const std::filesystem::path& path) {
    write_file(path, serialize(adapter, base_checksum));
}

LoraAdapter load_lora(const std::filesystem::path& path, const DenoiserParams& base) {
    auto [adapter, base_sum] = deserialize_lora(read_file(path));
    if (base_sum != checksum(base))
        throw FormatError("lora adapter '" + path.string() + "' belongs to a different base model");
    try {
        check_lora(base, adapter);
    } catch (const DimensionError& e) {
        throw FormatError(std::string("lora adapter: ") + e.what());
    }
    return adapter;
}

void save_dataset(const TrajectoryDataset& data, const std::filesystem::path& path) {
    write_file(path, serialize(data));
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
    return deserialize_dataset(read_file(path));
}

}  // namespace pcm
