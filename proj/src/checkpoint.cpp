#include "hcpo/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hcpo {

namespace {

void write_u64_le(std::ostream& os, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated header length");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& os, const double* data, long count) {
    static_assert(sizeof(double) == 8);
    for (long i = 0; i < count; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        write_u64_le(os, bits);
    }
}

void read_f64_le(std::istream& is, double* data, long count) {
    for (long i = 0; i < count; ++i) {
        uint64_t bits = read_u64_le(is);
        std::memcpy(&data[i], &bits, 8);
    }
}

json read_header(std::istream& is) {
    uint64_t len = read_u64_le(is);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::runtime_error("checkpoint: truncated header");
    return json::parse(text);
}

}  // namespace

void save_tensors(const std::string& path, const json& meta,
                  const std::vector<TensorView>& tensors) {
    json manifest = json::array();
    uint64_t offset = 0;
    for (const TensorView& t : tensors) {
        manifest.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols},
                            {"offset", offset}});
        offset += static_cast<uint64_t>(t.size()) * 8;
    }
    json header = {{"schema", 1}, {"meta", meta}, {"tensors", manifest}};
    std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    write_u64_le(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const TensorView& t : tensors) write_f64_le(os, t.data, t.size());
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

json load_tensors(const std::string& path, const std::vector<TensorView>& tensors) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    json header = read_header(is);
    if (header.at("schema").get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported schema in " + path);
    const json& manifest = header.at("tensors");
    if (manifest.size() != tensors.size())
        throw std::runtime_error("checkpoint: tensor count mismatch in " + path);
    for (size_t i = 0; i < tensors.size(); ++i) {
        const json& m = manifest[i];
        if (m.at("name").get<std::string>() != tensors[i].name ||
            m.at("rows").get<long>() != tensors[i].rows ||
            m.at("cols").get<long>() != tensors[i].cols)
            throw std::runtime_error("checkpoint: manifest mismatch at tensor " +
                                     tensors[i].name);
        read_f64_le(is, tensors[i].data, tensors[i].size());
    }
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
    return header.at("meta");
}

json peek_meta(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_header(is).at("meta");
}

json dims_to_json(const ModelDims& d) {
    return {{"layers", d.layers},   {"d_model", d.d_model}, {"heads", d.heads},
            {"d_ff", d.d_ff},       {"vocab", d.vocab},     {"max_seq", d.max_seq},
            {"max_response", d.max_response}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims d;
    d.layers = j.at("layers");
    d.d_model = j.at("d_model");
    d.heads = j.at("heads");
    d.d_ff = j.at("d_ff");
    d.vocab = j.at("vocab");
    d.max_seq = j.at("max_seq");
    d.max_response = j.at("max_response");
    return d;
}

void save_model(const std::string& path, ModelParams& params, const json& extra_meta) {
    json meta = {{"dims", dims_to_json(params.dims)}};
    if (!extra_meta.is_null())
        for (auto& [k, v] : extra_meta.items()) meta[k] = v;
    save_tensors(path, meta, tensor_views(params));
}

ModelParams load_model(const std::string& path, json* meta_out) {
    json meta = peek_meta(path);
    ModelParams p = ModelParams::zeros(dims_from_json(meta.at("dims")));
    load_tensors(path, tensor_views(p));
    if (meta_out) *meta_out = meta;
    return p;
}

}  // namespace hcpo
