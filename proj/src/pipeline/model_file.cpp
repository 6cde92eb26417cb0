#include "groupreg/pipeline/model_file.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "groupreg/error.hpp"

namespace groupreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'A', 'I', 'M', 'D'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

json layer_descriptor(const std::vector<ConvLayer<float>>& layers) {
    json arr = json::array();
    for (const auto& l : layers)
        arr.push_back({{"name", l.name},
                       {"in", l.in_channels},
                       {"out", l.out_channels},
                       {"kernel", l.kernel},
                       {"stride", l.stride}});
    return arr;
}

void write_file(const fs::path& file, const json& desc, const std::vector<ConvLayer<float>>& layers) {
    const std::string text = desc.dump();
    std::vector<unsigned char> bytes(kMagic, kMagic + 4);
    put_u32(bytes, kModelFileVersion);
    put_u32(bytes, static_cast<std::uint32_t>(text.size()));
    bytes.insert(bytes.end(), text.begin(), text.end());
    for (const auto& l : layers)
        for (const auto* t : {&l.weight, &l.bias}) {
            const auto d = t->data();
            const auto* raw = reinterpret_cast<const unsigned char*>(d.data());
            bytes.insert(bytes.end(), raw, raw + d.size_bytes());
        }
    put_u32(bytes, crc32_of(bytes.data(), bytes.size()));

    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + file.string());
}

struct RawModel {
    json desc;
    std::vector<float> params;
};

RawModel read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read " + file.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    const std::string name = file.string();
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(name + ": not a model file (bad magic)");
    if (bytes.size() < 16) throw ChecksumError(name + ": truncated model file");
    const std::size_t body = bytes.size() - 4;
    if (crc32_of(bytes.data(), body) != get_u32(bytes.data() + body))
        throw ChecksumError(name + ": checksum mismatch (corrupt or truncated)");
    if (get_u32(bytes.data() + 4) != kModelFileVersion)
        throw FormatError(name + ": unsupported model file version " +
                          std::to_string(get_u32(bytes.data() + 4)));
    const std::size_t len = get_u32(bytes.data() + 8);
    if (12 + len > body) throw FormatError(name + ": descriptor overruns file");
    RawModel m;
    try {
        m.desc = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<long>(len));
    } catch (const json::exception& e) {
        throw FormatError(name + ": malformed descriptor (" + e.what() + ")");
    }
    const std::size_t blob = body - 12 - len;
    if (blob % sizeof(float) != 0) throw FormatError(name + ": parameter blob is not f32");
    m.params.resize(blob / sizeof(float));
    std::memcpy(m.params.data(), bytes.data() + 12 + len, blob);
    return m;
}

// Rebuilds layers from the descriptor and fills them from the blob.
std::vector<ConvLayer<float>> restore_layers(const json& arr, const std::vector<float>& params,
                                             const std::string& name) {
    std::vector<ConvLayer<float>> layers;
    std::size_t offset = 0;
    for (const auto& d : arr) {
        auto l = make_conv_layer<float>(d.at("name").get<std::string>(), d.at("in").get<std::size_t>(),
                                        d.at("out").get<std::size_t>(), d.at("kernel").get<std::size_t>(),
                                        d.at("stride").get<std::size_t>());
        for (auto* t : {&l.weight, &l.bias}) {
            auto dst = t->mutable_data();
            if (offset + dst.size() > params.size())
                throw FormatError(name + ": parameter blob shorter than the architecture");
            std::memcpy(dst.data(), params.data() + offset, dst.size_bytes());
            offset += dst.size();
        }
        layers.push_back(std::move(l));
    }
    if (offset != params.size()) throw FormatError(name + ": parameter blob longer than the architecture");
    return layers;
}

ModelKind kind_of(const json& desc, const std::string& name) {
    const auto k = desc.value("kind", std::string{});
    if (k == "registration") return ModelKind::registration;
    if (k == "edge_detector") return ModelKind::edge_detector;
    throw FormatError(name + ": unknown model kind '" + k + "'");
}

}  // namespace

ModelKind peek_model_kind(const fs::path& file) {
    return kind_of(read_file(file).desc, file.string());
}

void save_model(const fs::path& file, const RegistrationModel& model) {
    json d;
    d["kind"] = "registration";
    d["variant"] = to_string(model.variant);
    d["lambda"] = model.loss.lambda;
    d["cc_window"] = model.loss.cc_window;
    d["epsilon"] = model.loss.epsilon;
    d["k"] = model.k;
    d["parameter_count"] = model.net.parameter_count();
    d["layers"] = layer_descriptor(model.net.layers());
    write_file(file, d, model.net.layers());
}

void save_model(const fs::path& file, const EdgeDetector<float>& detector) {
    if (!detector.ready()) throw ConfigError("save_model: edge detector is not initialised");
    json d;
    d["kind"] = "edge_detector";
    d["input_mean"] = detector.input_mean();
    d["input_std"] = detector.input_std();
    d["parameter_count"] = detector.parameter_count();
    d["layers"] = layer_descriptor(detector.layers());
    write_file(file, d, detector.layers());
}

RegistrationModel load_registration_model(const fs::path& file) {
    const auto raw = read_file(file);
    const std::string name = file.string();
    if (kind_of(raw.desc, name) != ModelKind::registration)
        throw FormatError(name + ": expected a registration model, found an edge detector");
    try {
        RegistrationModel m;
        m.variant = parse_variant(raw.desc.at("variant").get<std::string>());
        m.loss.lambda = raw.desc.at("lambda").get<double>();
        m.loss.cc_window = raw.desc.at("cc_window").get<std::size_t>();
        m.loss.epsilon = raw.desc.at("epsilon").get<double>();
        m.k = raw.desc.value("k", std::size_t{0});
        for (auto& l : restore_layers(raw.desc.at("layers"), raw.params, name))
            m.net.layers().push_back(std::move(l));
        // Only the fixed architecture is supported.
        const auto expect = RegistrationNet<float>::architecture();
        if (expect.size() != m.net.layers().size())
            throw FormatError(name + ": layer count does not match the registration network");
        for (std::size_t i = 0; i < expect.size(); ++i) {
            const auto &a = expect[i], &b = m.net.layers()[i];
            if (a.in_channels != b.in_channels || a.out_channels != b.out_channels ||
                a.kernel != b.kernel || a.stride != b.stride)
                throw FormatError(name + ": layer '" + b.name + "' does not match the architecture");
        }
        m.net.set_trainable(false);
        return m;
    } catch (const json::exception& e) {
        throw FormatError(name + ": malformed descriptor (" + e.what() + ")");
    } catch (const ConfigError& e) {
        throw FormatError(name + ": " + e.what());
    }
}

EdgeDetector<float> load_edge_detector(const fs::path& file) {
    const auto raw = read_file(file);
    const std::string name = file.string();
    if (kind_of(raw.desc, name) != ModelKind::edge_detector)
        throw FormatError(name + ": expected an edge detector, found a registration model");
    try {
        EdgeDetector<float> d;
        for (auto& l : restore_layers(raw.desc.at("layers"), raw.params, name))
            d.layers().push_back(std::move(l));
        d.set_input_normalisation(raw.desc.at("input_mean").get<double>(),
                                  raw.desc.at("input_std").get<double>());
        d.set_trainable(false);
        return d;
    } catch (const json::exception& e) {
        throw FormatError(name + ": malformed descriptor (" + e.what() + ")");
    } catch (const ConfigError& e) {
        throw FormatError(name + ": " + e.what());
    }
}

}  // namespace groupreg
