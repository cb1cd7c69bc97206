#pragma once

#include "pgcr/nn.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pgcr {

namespace detail {

/// Explicit little-endian encoding so checkpoint bytes are
/// platform-independent, not just run-independent.
inline void write_le_doubles(std::ostream& out, const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], sizeof(bits));
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

inline void read_le_doubles(std::istream& in, double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        require(in.good(), "checkpoint: truncated parameter blob");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        std::memcpy(&data[i], &bits, sizeof(bits));
    }
}

}  // namespace detail

/// MLP checkpoint: one JSON header line (architecture), then the raw
/// little-endian parameters, layer by layer, weights (column-major) before
/// biases. Round-trips bit-exactly.
inline void write_mlp(std::ostream& out, const MlpD& net) {
    nlohmann::ordered_json header;
    header["format"] = "pgcr-mlp";
    header["version"] = 1;
    header["scalar"] = "f64";
    header["sizes"] = net.layer_sizes();
    std::vector<std::string> acts;
    for (const auto& l : net.layers) acts.emplace_back(to_string(l.act));
    header["activations"] = acts;
    out << header.dump() << '\n';
    for (const auto& l : net.layers) {
        detail::write_le_doubles(out, l.w.data(), static_cast<std::size_t>(l.w.size()));
        detail::write_le_doubles(out, l.b.data(), static_cast<std::size_t>(l.b.size()));
    }
}

inline MlpD read_mlp(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "checkpoint: missing header");
    const auto header = nlohmann::ordered_json::parse(line);
    require(header.at("format") == "pgcr-mlp" && header.at("version") == 1 &&
                header.at("scalar") == "f64",
            "checkpoint: unsupported mlp header");
    const std::vector<int> sizes = header.at("sizes").get<std::vector<int>>();
    const std::vector<std::string> acts = header.at("activations").get<std::vector<std::string>>();
    require(sizes.size() >= 2 && acts.size() + 1 == sizes.size(), "checkpoint: bad architecture");
    MlpD net;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        typename MlpD::Layer l;
        l.w.resize(sizes[i + 1], sizes[i]);
        l.b.resize(sizes[i + 1]);
        l.act = activation_from_string(acts[i]);
        detail::read_le_doubles(in, l.w.data(), static_cast<std::size_t>(l.w.size()));
        detail::read_le_doubles(in, l.b.data(), static_cast<std::size_t>(l.b.size()));
        net.layers.push_back(std::move(l));
    }
    return net;
}

inline void save_mlp(const std::string& path, const MlpD& net) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_mlp: cannot open " + path);
    write_mlp(out, net);
}

inline MlpD load_mlp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_mlp: cannot open " + path);
    return read_mlp(in);
}

}  // namespace pgcr
