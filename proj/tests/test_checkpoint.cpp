#include <cstring>
#include <string_view>

#include "doctest.h"
#include "pcm/checkpoint.hpp"
#include "test_util.hpp"

using namespace pcm;

namespace {

std::span<const std::uint8_t> bytes_of(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

TEST_CASE("FNV-1a reference vectors") {
    CHECK(fnv1a64(bytes_of("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(bytes_of("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(bytes_of("foobar")) == 0x85944171f73967e8ULL);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    for (auto act : {Activation::silu, Activation::tanh}) {
        const auto p = test::small_net(17, 1, 16, act);
        const Bytes b = serialize(p);
        const DenoiserParams q = deserialize_denoiser(b);
        CHECK(q == p);
        CHECK(serialize(q) == b);
        CHECK(checksum(q) == fnv1a64(b));
    }
    const auto lin = NoiseSchedule::linear(9);
    SeededRng rng(2);
    const auto p = make_denoiser(test::small_shape(8), lin, rng);
    CHECK(deserialize_denoiser(serialize(p)).schedule == lin);
}

TEST_CASE("checkpoint header layout") {
    const auto p = test::small_net(12, 3);
    const Bytes b = serialize(p);
    REQUIRE(b.size() > 24);
    CHECK(std::memcmp(b.data(), "PCMW", 4) == 0);
    auto u32 = [&](std::size_t off) {
        return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 |
               std::uint32_t(b[off + 2]) << 16 | std::uint32_t(b[off + 3]) << 24;
    };
    CHECK(u32(4) == kFormatVersion);
    CHECK(u32(8) == 2);    // n
    CHECK(u32(12) == 12);  // T
    CHECK(u32(16) == 4);   // embedding frequencies
    CHECK(u32(20) == 4);   // layers
}

TEST_CASE("datasets round-trip and keep their header") {
    const auto base = test::small_net(10, 4);
    const auto data = generate_dataset(base, StepFn::ddim(base.schedule), 3, 4, 5);
    const Bytes b = serialize(data);
    const TrajectoryDataset back = deserialize_dataset(b);
    CHECK(back == data);
    CHECK(back.header.N == 3);
    CHECK(back.header.T == 10);
    CHECK(back.header.K == 4);
    CHECK(back.header.n == 2);
    CHECK(serialize(back) == b);
}

TEST_CASE("corrupted files are rejected") {
    const auto p = test::small_net(8, 6);
    const Bytes good = serialize(p);

    Bytes bad = good;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_denoiser(bad), FormatError);

    bad = good;
    bad[4] = 9;  // version
    CHECK_THROWS_AS(deserialize_denoiser(bad), FormatError);

    CHECK_THROWS_AS(deserialize_denoiser(Bytes(good.begin(), good.end() - 3)), FormatError);
    CHECK_THROWS_AS(deserialize_denoiser(Bytes(good.begin(), good.begin() + 10)), FormatError);
    CHECK_THROWS_AS(deserialize_denoiser(Bytes{}), FormatError);

    bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(deserialize_denoiser(bad), FormatError);

    const auto data = generate_dataset(p, StepFn::ddim(p.schedule), 2, 2, 7);
    Bytes d = serialize(data);
    CHECK_THROWS_AS(deserialize_denoiser(d), FormatError);  // wrong magic for the type
    d[1] = 'Z';
    CHECK_THROWS_AS(deserialize_dataset(d), FormatError);
    d = serialize(data);
    CHECK_THROWS_AS(deserialize_dataset(Bytes(d.begin(), d.end() - 8)), FormatError);

    SeededRng rng(8);
    Bytes l = serialize(make_lora(p, 2, 0.1, rng), checksum(p));
    l.resize(l.size() - 1);
    CHECK_THROWS_AS(deserialize_lora(l), FormatError);
}

TEST_CASE("file helpers") {
    const auto dir = std::filesystem::temp_directory_path() / "pcm_test_checkpoint";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto p = test::small_net(8, 9);
    save_checkpoint(p, dir / "m.ckpt");
    CHECK(load_checkpoint(dir / "m.ckpt") == p);
    CHECK(read_file(dir / "m.ckpt") == serialize(p));

    const auto data = generate_dataset(p, StepFn::euler(8), 2, 3, 10);
    save_dataset(data, dir / "d.pctd");
    CHECK(load_dataset(dir / "d.pctd") == data);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
    CHECK_THROWS_AS(write_file(dir / "m.ckpt" / "x", Bytes{1}), IoError);
    std::filesystem::remove_all(dir);
}
