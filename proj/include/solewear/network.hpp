#pragma once

#include <array>
#include <functional>
#include <string>

#include "adam.hpp"
#include "image.hpp"
#include "layers.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace solewear {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Direction the model maps along the wear timeline. A forward model takes an
// earlier impression plus an elapsed-week count; a backward model takes a
// later impression plus the absolute target week as a one-hot code.
enum class Variant { Forward, Backward };

inline const char* variant_name(Variant v) {
    return v == Variant::Forward ? "forward" : "backward";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "forward") return Variant::Forward;
    if (s == "backward") return Variant::Backward;
    throw ConfigError("unknown variant '" + s + "' (expected forward or backward)");
}

constexpr int kMaxWeek = 52;
constexpr int kDeltaOneHotWidth = 52;

// Conditioning input for one prediction. Scalar mode carries an elapsed-week
// count scaled to [0, 1]; one-hot mode carries an absolute week w as a
// 52-wide indicator with slot w/2 set. Weeks are even; slots 27..51 stay
// unused but keep the interface width fixed.
struct DeltaEncoding {
    enum class Mode { Scalar, OneHot };

    Mode mode = Mode::Scalar;
    int weeks = 0;

    static DeltaEncoding scalar(int delta_weeks) {
        if (delta_weeks < 0 || delta_weeks > kMaxWeek || delta_weeks % 2 != 0)
            throw ConfigError("delta: elapsed weeks must be even and in [0, " +
                              std::to_string(kMaxWeek) + "], got " +
                              std::to_string(delta_weeks));
        return {Mode::Scalar, delta_weeks};
    }

    static DeltaEncoding one_hot_week(int week) {
        if (week < 0 || week > kMaxWeek || week % 2 != 0)
            throw ConfigError("delta: target week must be even and in [0, " +
                              std::to_string(kMaxWeek) + "], got " + std::to_string(week));
        return {Mode::OneHot, week};
    }

    // Accepts a raw 52-wide indicator vector; exactly one slot may be hot.
    static DeltaEncoding one_hot_from_vector(const std::vector<float>& v) {
        if (v.size() != kDeltaOneHotWidth)
            throw ConfigError("delta: one-hot vector must have width " +
                              std::to_string(kDeltaOneHotWidth) + ", got " +
                              std::to_string(v.size()));
        int hot = -1;
        for (int i = 0; i < kDeltaOneHotWidth; ++i) {
            if (v[i] == 0.f) continue;
            if (v[i] != 1.f || hot >= 0)
                throw ConfigError("delta: one-hot vector must contain a single 1");
            hot = i;
        }
        if (hot < 0) throw ConfigError("delta: one-hot vector must contain a single 1");
        return {Mode::OneHot, hot * 2};
    }

    int slot() const { return weeks / 2; }

    int input_width() const { return mode == Mode::Scalar ? 1 : kDeltaOneHotWidth; }

    template <typename T>
    Tensor<T> to_input() const {
        if (mode == Mode::Scalar) {
            Tensor<T> t({1});
            t[0] = static_cast<T>(weeks) / static_cast<T>(kMaxWeek);
            return t;
        }
        Tensor<T> t({kDeltaOneHotWidth});
        t[slot()] = T(1);
        return t;
    }
};

constexpr int kStages = 5;

// Geometry and widths of the auto-encoder. Every stage halves (or doubles)
// the spatial size via 4x4 kernels, stride 2, padding 1, so the canvas must
// divide by 2^5.
struct NetworkConfig {
    Variant variant = Variant::Forward;
    int input_height = 160;
    int input_width = 64;
    std::array<int, kStages> channels = {8, 16, 32, 64, 128};
    int delta_hidden = 64;
    int delta_channels = 8;

    // Full-resolution configuration matching the source imagery.
    static NetworkConfig full() {
        NetworkConfig c;
        c.input_height = 640;
        c.input_width = 256;
        c.channels = {32, 64, 128, 256, 512};
        return c;
    }

    void validate() const {
        if (input_height < 32 || input_width < 32 || input_height % 32 != 0 ||
            input_width % 32 != 0)
            throw ConfigError("network: input " + std::to_string(input_height) + "x" +
                              std::to_string(input_width) +
                              " must be at least 32x32 and divisible by 32");
        for (int c : channels)
            if (c <= 0) throw ConfigError("network: channel counts must be positive");
        if (delta_hidden <= 0 || delta_channels <= 0)
            throw ConfigError("network: delta branch widths must be positive");
    }

    int bottleneck_h() const { return input_height / 32; }
    int bottleneck_w() const { return input_width / 32; }
    int delta_input_width() const {
        return variant == Variant::Forward ? 1 : kDeltaOneHotWidth;
    }

    ConvSpec encoder_spec(int i) const {
        ConvSpec s;
        s.in_c = i == 0 ? 1 : channels[i - 1];
        s.out_c = channels[i];
        return s;
    }

    ConvSpec decoder_spec(int i) const {
        ConvSpec s;
        s.in_c = i == 0 ? channels[kStages - 1] + delta_channels : channels[kStages - 1 - i];
        s.out_c = i == kStages - 1 ? 1 : channels[kStages - 2 - i];
        return s;
    }
};

// All parameter tensors plus their Adam moments. Iteration order through
// for_each is fixed and is the order used for seeding, checkpoints and
// updates.
template <typename T>
struct ModelParams {
    NetworkConfig config;
    std::array<Tensor<T>, kStages> enc_w, enc_b;
    std::array<Tensor<T>, 2> del_w, del_b;
    std::array<Tensor<T>, kStages> dec_w, dec_b;
    std::array<AdamState<T>, kStages> enc_w_adam, enc_b_adam;
    std::array<AdamState<T>, 2> del_w_adam, del_b_adam;
    std::array<AdamState<T>, kStages> dec_w_adam, dec_b_adam;

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (int i = 0; i < kStages; ++i) {
            fn("enc" + std::to_string(i) + ".w", enc_w[i], enc_w_adam[i]);
            fn("enc" + std::to_string(i) + ".b", enc_b[i], enc_b_adam[i]);
        }
        for (int i = 0; i < 2; ++i) {
            fn("delta" + std::to_string(i) + ".w", del_w[i], del_w_adam[i]);
            fn("delta" + std::to_string(i) + ".b", del_b[i], del_b_adam[i]);
        }
        for (int i = 0; i < kStages; ++i) {
            fn("dec" + std::to_string(i) + ".w", dec_w[i], dec_w_adam[i]);
            fn("dec" + std::to_string(i) + ".b", dec_b[i], dec_b_adam[i]);
        }
    }
};

// Parameter gradients, laid out exactly like ModelParams.
template <typename T>
struct ModelGrads {
    std::array<Tensor<T>, kStages> enc_w, enc_b;
    std::array<Tensor<T>, 2> del_w, del_b;
    std::array<Tensor<T>, kStages> dec_w, dec_b;

    template <typename Fn>
    void zip(ModelParams<T>& p, Fn&& fn) {
        for (int i = 0; i < kStages; ++i) {
            fn(p.enc_w[i], enc_w[i], p.enc_w_adam[i]);
            fn(p.enc_b[i], enc_b[i], p.enc_b_adam[i]);
        }
        for (int i = 0; i < 2; ++i) {
            fn(p.del_w[i], del_w[i], p.del_w_adam[i]);
            fn(p.del_b[i], del_b[i], p.del_b_adam[i]);
        }
        for (int i = 0; i < kStages; ++i) {
            fn(p.dec_w[i], dec_w[i], p.dec_w_adam[i]);
            fn(p.dec_b[i], dec_b[i], p.dec_b_adam[i]);
        }
    }
};

namespace detail {

template <typename T>
void glorot_fill(Tensor<T>& t, int fan_in, int fan_out, Pcg32& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

} // namespace detail

// Fresh parameters. Each tensor draws from its own seeded stream, so the
// result depends only on (config, seed).
template <typename T>
ModelParams<T> build_model(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams<T> p;
    p.config = config;

    const int h5 = config.bottleneck_h(), w5 = config.bottleneck_w();
    for (int i = 0; i < kStages; ++i) {
        ConvSpec e = config.encoder_spec(i);
        p.enc_w[i] = Tensor<T>({e.out_c, e.in_c, e.kh, e.kw});
        p.enc_b[i] = Tensor<T>({e.out_c});
        ConvSpec d = config.decoder_spec(i);
        p.dec_w[i] = Tensor<T>({d.in_c, d.out_c, d.kh, d.kw});
        p.dec_b[i] = Tensor<T>({d.out_c});
    }
    p.del_w[0] = Tensor<T>({config.delta_hidden, config.delta_input_width()});
    p.del_b[0] = Tensor<T>({config.delta_hidden});
    p.del_w[1] = Tensor<T>({config.delta_channels * h5 * w5, config.delta_hidden});
    p.del_b[1] = Tensor<T>({config.delta_channels * h5 * w5});

    std::uint64_t stream = 0;
    p.for_each([&](const std::string&, Tensor<T>& t, AdamState<T>& st) {
        Pcg32 rng(seed, stream++);
        if (t.rank() == 4) {
            int k = t.shape[2] * t.shape[3];
            detail::glorot_fill(t, t.shape[1] * k, t.shape[0] * k, rng);
        } else if (t.rank() == 2) {
            detail::glorot_fill(t, t.shape[1], t.shape[0], rng);
        } // biases stay zero
        st = AdamState<T>(t.shape);
    });
    return p;
}

template <typename T>
struct ForwardCache {
    std::array<Tensor<T>, kStages> enc_in, enc_z;
    std::array<Tensor<T>, 2> del_in, del_z;
    Tensor<T> feat;       // encoder output after relu
    Tensor<T> delta_map;  // delta branch output reshaped to (dc, h5, w5)
    std::array<Tensor<T>, kStages> dec_in, dec_z;
    Tensor<T> output;     // after sigmoid
};

template <typename T>
void check_delta_mode(const NetworkConfig& config, const DeltaEncoding& delta) {
    bool want_scalar = config.variant == Variant::Forward;
    bool is_scalar = delta.mode == DeltaEncoding::Mode::Scalar;
    if (want_scalar != is_scalar)
        throw ConfigError(std::string("delta encoding is ") +
                          (is_scalar ? "scalar" : "one-hot") + " but the model variant is " +
                          variant_name(config.variant));
}

// Delta branch alone: two dense layers with relu, reshaped onto the
// bottleneck grid.
template <typename T>
Tensor<T> encode_delta(const ModelParams<T>& p, const DeltaEncoding& delta,
                       ForwardCache<T>* cache = nullptr) {
    check_delta_mode<T>(p.config, delta);
    Tensor<T> x = delta.to_input<T>();
    Tensor<T> z0 = dense_forward(x, p.del_w[0], p.del_b[0], "delta dense 0");
    Tensor<T> a0 = relu(z0);
    Tensor<T> z1 = dense_forward(a0, p.del_w[1], p.del_b[1], "delta dense 1");
    Tensor<T> a1 = relu(z1);
    Tensor<T> g(Shape{p.config.delta_channels, p.config.bottleneck_h(), p.config.bottleneck_w()},
                std::move(a1.data));
    if (cache) {
        cache->del_in = {std::move(x), std::move(a0)};
        cache->del_z = {std::move(z0), std::move(z1)};
        cache->delta_map = g;
    }
    return g;
}

template <typename T>
Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& input, const DeltaEncoding& delta,
                  ForwardCache<T>* cache = nullptr) {
    const NetworkConfig& c = p.config;
    require_shape(input, {1, c.input_height, c.input_width}, "network input");

    Tensor<T> x = input;
    ForwardCache<T> local;
    ForwardCache<T>& cc = cache ? *cache : local;

    for (int i = 0; i < kStages; ++i) {
        cc.enc_in[i] = x;
        Tensor<T> z = conv2d_forward(x, c.encoder_spec(i), p.enc_w[i], p.enc_b[i],
                                     ("encoder conv " + std::to_string(i)).c_str());
        x = relu(z);
        cc.enc_z[i] = std::move(z);
    }
    cc.feat = x;

    Tensor<T> g = encode_delta(p, delta, &cc);
    Tensor<T> y = concat_channels(cc.feat, g, "bottleneck concat");

    for (int i = 0; i < kStages; ++i) {
        cc.dec_in[i] = y;
        Tensor<T> z = tconv2d_forward(y, c.decoder_spec(i), p.dec_w[i], p.dec_b[i],
                                      ("decoder tconv " + std::to_string(i)).c_str());
        y = i + 1 < kStages ? relu(z) : sigmoid(z);
        cc.dec_z[i] = std::move(z);
    }
    cc.output = y;
    return y;
}

template <typename T>
ModelGrads<T> backward(const ModelParams<T>& p, const ForwardCache<T>& cache,
                       const Tensor<T>& grad_output) {
    const NetworkConfig& c = p.config;
    ModelGrads<T> g;

    Tensor<T> gy = sigmoid_backward(grad_output, cache.output);
    for (int i = kStages - 1; i >= 0; --i) {
        if (i + 1 < kStages) gy = relu_backward(gy, cache.dec_z[i]);
        ConvGrads<T> cg = tconv2d_backward(gy, cache.dec_in[i], c.decoder_spec(i), p.dec_w[i],
                                           ("decoder tconv " + std::to_string(i)).c_str());
        g.dec_w[i] = std::move(cg.weights);
        g.dec_b[i] = std::move(cg.bias);
        gy = std::move(cg.input);
    }

    auto [gf, gdel] = split_channels(gy, c.channels[kStages - 1]);

    int del_n = gdel.numel();
    Tensor<T> gd(Shape{del_n}, std::move(gdel.data));
    gd = relu_backward(gd, cache.del_z[1]);
    DenseGrads<T> d1 = dense_backward(gd, cache.del_in[1], p.del_w[1], "delta dense 1");
    g.del_w[1] = std::move(d1.weights);
    g.del_b[1] = std::move(d1.bias);
    Tensor<T> gd0 = relu_backward(d1.input, cache.del_z[0]);
    DenseGrads<T> d0 = dense_backward(gd0, cache.del_in[0], p.del_w[0], "delta dense 0");
    g.del_w[0] = std::move(d0.weights);
    g.del_b[0] = std::move(d0.bias);

    Tensor<T> gx = std::move(gf);
    for (int i = kStages - 1; i >= 0; --i) {
        gx = relu_backward(gx, cache.enc_z[i]);
        ConvGrads<T> cg = conv2d_backward(gx, cache.enc_in[i], c.encoder_spec(i), p.enc_w[i],
                                          ("encoder conv " + std::to_string(i)).c_str());
        g.enc_w[i] = std::move(cg.weights);
        g.enc_b[i] = std::move(cg.bias);
        gx = std::move(cg.input);
    }
    return g;
}

// Image-level convenience wrapper.
template <typename T>
Image predict(const ModelParams<T>& p, const Image& input, const DeltaEncoding& delta) {
    Tensor<T> out = forward(p, input.to_tensor<T>(), delta);
    return Image::from_tensor(out);
}

} // namespace solewear
