#include <doctest.h>

#include <stdexcept>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "hcpo/checkpoint.hpp"
#include "hcpo/rng.hpp"

using namespace hcpo;

namespace {

std::string temp_path(const char* name) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hcpo_ckpt_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

ModelDims small_dims() {
    ModelDims d;
    d.layers = 2;
    d.d_model = 8;
    d.heads = 2;
    d.d_ff = 16;
    d.vocab = 24;
    d.max_seq = 32;
    d.max_response = 8;
    return d;
}

double param_diff(ModelParams& a, ModelParams& b) {
    auto va = tensor_views(a), vb = tensor_views(b);
    double worst = 0.0;
    for (size_t i = 0; i < va.size(); ++i)
        for (long j = 0; j < va[i].size(); ++j)
            worst = std::max(worst, std::abs(va[i].data[j] - vb[i].data[j]));
    return worst;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("model save/load round trip is exact") {
    Rng rng = derive_rng(41, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string path = temp_path("model.bin");
    save_model(path, p, {{"note", 7}});
    json meta;
    ModelParams q = load_model(path, &meta);
    CHECK(q.dims == p.dims);
    CHECK(param_diff(p, q) == 0.0);
    CHECK(meta.at("note") == 7);
}

TEST_CASE("peek_meta recovers dims without shaping tensors") {
    Rng rng = derive_rng(42, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string path = temp_path("peek.bin");
    save_model(path, p);
    json meta = peek_meta(path);
    CHECK(dims_from_json(meta.at("dims")) == small_dims());
}

TEST_CASE("file layout starts with a little-endian header length") {
    Rng rng = derive_rng(43, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string path = temp_path("layout.bin");
    save_model(path, p);
    std::ifstream is(path, std::ios::binary);
    uint64_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header(hlen, '\0');
    is.read(header.data(), static_cast<std::streamsize>(hlen));
    json h = json::parse(header);
    CHECK(h.at("schema") == 1);
    long payload = 0;
    for (const auto& t : h.at("tensors"))
        payload += t.at("rows").get<long>() * t.at("cols").get<long>();
    CHECK(static_cast<long>(std::filesystem::file_size(path)) ==
          8 + static_cast<long>(hlen) + payload * 8);
}

TEST_CASE("mismatched shapes are rejected") {
    Rng rng = derive_rng(44, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string path = temp_path("shape.bin");
    save_model(path, p);
    ModelDims other = small_dims();
    other.d_ff = 32;
    ModelParams q = ModelParams::zeros(other);
    CHECK_THROWS_AS(load_tensors(path, tensor_views(q)), std::runtime_error);
}

TEST_CASE("truncated files are rejected") {
    Rng rng = derive_rng(45, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string path = temp_path("trunc.bin");
    save_model(path, p);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 64);
    ModelParams q = ModelParams::zeros(small_dims());
    CHECK_THROWS_AS(load_tensors(path, tensor_views(q)), std::runtime_error);
    CHECK_THROWS_AS(load_model(temp_path("missing.bin")), std::runtime_error);
}

TEST_CASE("saved bytes are deterministic") {
    Rng rng = derive_rng(46, {"ckpt"});
    ModelParams p = ModelParams::init(small_dims(), rng);
    std::string p1 = temp_path("det1.bin"), p2 = temp_path("det2.bin");
    save_model(p1, p);
    save_model(p2, p);
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("dims json round trip") {
    ModelDims d = small_dims();
    CHECK(dims_from_json(dims_to_json(d)) == d);
}

}  // TEST_SUITE
