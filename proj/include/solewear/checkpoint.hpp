#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "network.hpp"

namespace solewear {

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                           std::uint32_t crc = 0) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

struct ByteWriter {
    std::vector<std::uint8_t> buf;

    void u8(std::uint8_t v) { buf.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
};

struct ByteReader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    const std::string& path;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw CheckpointError("truncated checkpoint: " + path);
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    float f32() {
        std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

} // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;
inline const char kCheckpointMagic[4] = {'S', 'W', 'C', 'K'};

// Binary checkpoint: magic, version, self-describing JSON config block with
// its own digest, length-prefixed named little-endian float32 tensors
// (weights plus Adam moments), trailing CRC32 over the whole stream.
inline void save_checkpoint(ModelParams<float>& params, std::uint64_t seed,
                            const std::string& path) {
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);

    nlohmann::json cfg;
    const NetworkConfig& c = params.config;
    cfg["variant"] = variant_name(c.variant);
    cfg["input_height"] = c.input_height;
    cfg["input_width"] = c.input_width;
    cfg["channels"] = c.channels;
    cfg["delta_hidden"] = c.delta_hidden;
    cfg["delta_channels"] = c.delta_channels;
    cfg["seed"] = seed;
    cfg["init"] = "uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))), zero bias";
    cfg["delta_scaling"] = "scalar elapsed weeks divided by 52";
    cfg["precision"] = "float32";
    nlohmann::json steps = nlohmann::json::object();
    params.for_each([&](const std::string& name, Tensor<float>&, AdamState<float>& st) {
        steps[name] = st.step;
    });
    cfg["adam_steps"] = steps;

    std::string cfg_text = cfg.dump();
    w.u32(static_cast<std::uint32_t>(cfg_text.size()));
    w.bytes(cfg_text.data(), cfg_text.size());
    w.u32(detail::crc32(reinterpret_cast<const std::uint8_t*>(cfg_text.data()), cfg_text.size()));

    std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
    params.for_each([&](const std::string& name, Tensor<float>& t, AdamState<float>& st) {
        tensors.emplace_back(name, &t);
        tensors.emplace_back(name + "#m", &st.m);
        tensors.emplace_back(name + "#v", &st.v);
    });

    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<std::uint8_t>(t->rank()));
        for (int d : t->shape) w.u32(static_cast<std::uint32_t>(d));
        w.u64(static_cast<std::uint64_t>(t->data.size()) * 4);
        for (float v : t->data) w.f32(v);
    }

    w.u32(detail::crc32(w.buf.data(), w.buf.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(w.buf.data()), w.buf.size());
    if (!f) throw IoError("short write: " + path);
}

struct Checkpoint {
    ModelParams<float> params;
    std::uint64_t seed = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < 12) throw CheckpointError("truncated checkpoint: " + path);
    if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file: " + path);

    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(buf[buf.size() - 4 + i]) << (8 * i);
    if (detail::crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw CheckpointError("checksum mismatch (corrupt or truncated): " + path);

    detail::ByteReader r{buf, 4, path};
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + "): " + path);

    std::uint32_t cfg_len = r.u32();
    std::string cfg_text = r.str(cfg_len);
    std::uint32_t cfg_crc = r.u32();
    if (detail::crc32(reinterpret_cast<const std::uint8_t*>(cfg_text.data()), cfg_text.size()) !=
        cfg_crc)
        throw CheckpointError("config digest mismatch: " + path);

    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(cfg_text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("malformed config block in " + path + ": " + e.what());
    }

    NetworkConfig nc;
    Checkpoint out;
    try {
        nc.variant = variant_from_name(cfg.at("variant").get<std::string>());
        nc.input_height = cfg.at("input_height").get<int>();
        nc.input_width = cfg.at("input_width").get<int>();
        auto ch = cfg.at("channels").get<std::vector<int>>();
        if (ch.size() != kStages)
            throw CheckpointError("config lists " + std::to_string(ch.size()) +
                                  " channel entries: " + path);
        std::copy(ch.begin(), ch.end(), nc.channels.begin());
        nc.delta_hidden = cfg.at("delta_hidden").get<int>();
        nc.delta_channels = cfg.at("delta_channels").get<int>();
        out.seed = cfg.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("config block missing fields in " + path + ": " + e.what());
    }

    out.params = build_model<float>(nc, out.seed);

    std::uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor<float>*>> slots;
    out.params.for_each([&](const std::string& name, Tensor<float>& t, AdamState<float>& st) {
        slots.emplace_back(name, &t);
        slots.emplace_back(name + "#m", &st.m);
        slots.emplace_back(name + "#v", &st.v);
        if (cfg.contains("adam_steps") && cfg["adam_steps"].contains(name))
            st.step = cfg["adam_steps"][name].get<long long>();
    });
    if (count != slots.size())
        throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                              std::to_string(slots.size()) + ": " + path);

    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        int rank = r.u8();
        Shape shape(rank);
        for (int d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
        std::uint64_t bytes = r.u64();

        if (name != slots[i].first)
            throw CheckpointError("unexpected tensor '" + name + "' (expected '" +
                                  slots[i].first + "'): " + path);
        Tensor<float>& dst = *slots[i].second;
        if (shape != dst.shape)
            throw CheckpointError("tensor '" + name + "' has shape " + shape_str(shape) +
                                  ", model expects " + shape_str(dst.shape) + ": " + path);
        if (bytes != dst.data.size() * 4)
            throw CheckpointError("tensor '" + name + "' payload size mismatch: " + path);
        for (float& v : dst.data) v = r.f32();
    }
    return out;
}

inline void require_variant(const ModelParams<float>& params, Variant expected) {
    if (params.config.variant != expected)
        throw CheckpointError(std::string("checkpoint holds a ") +
                              variant_name(params.config.variant) + " model but " +
                              variant_name(expected) + " inference was requested");
}

} // namespace solewear
