#pragma once

#include <string>
#include <utility>

#include "tensor.hpp"

namespace solewear {

// Convolution geometry. Inputs are (C, H, W); conv weights are
// (out_c, in_c, kh, kw); transpose-conv weights are (in_c, out_c, kh, kw).
struct ConvSpec {
    int in_c = 1;
    int out_c = 1;
    int kh = 4, kw = 4;
    int sh = 2, sw = 2;
    int ph = 1, pw = 1;

    void validate(const char* what) const {
        if (in_c <= 0 || out_c <= 0 || kh <= 0 || kw <= 0 || sh <= 0 || sw <= 0 ||
            ph < 0 || pw < 0)
            throw ShapeError(std::string(what) + ": invalid geometry (channels " +
                             std::to_string(in_c) + "->" + std::to_string(out_c) +
                             ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                             ", stride " + std::to_string(sh) + "x" + std::to_string(sw) +
                             ", padding " + std::to_string(ph) + "x" + std::to_string(pw) + ")");
    }

    // Output size of the strided convolution.
    std::pair<int, int> conv_out(int h, int w, const char* what) const {
        validate(what);
        int oh = (h + 2 * ph - kh) / sh + 1;
        int ow = (w + 2 * pw - kw) / sw + 1;
        if (h + 2 * ph < kh || w + 2 * pw < kw || oh < 1 || ow < 1)
            throw ShapeError(std::string(what) + ": kernel " + std::to_string(kh) + "x" +
                             std::to_string(kw) + " does not fit input " + std::to_string(h) +
                             "x" + std::to_string(w) + " with padding " + std::to_string(ph) +
                             "x" + std::to_string(pw));
        return {oh, ow};
    }

    // Output size of the transpose convolution (inverse of conv_out).
    std::pair<int, int> tconv_out(int h, int w, const char* what) const {
        validate(what);
        int oh = (h - 1) * sh - 2 * ph + kh;
        int ow = (w - 1) * sw - 2 * pw + kw;
        if (oh < 1 || ow < 1)
            throw ShapeError(std::string(what) + ": transpose output " + std::to_string(oh) +
                             "x" + std::to_string(ow) + " collapses for input " +
                             std::to_string(h) + "x" + std::to_string(w));
        return {oh, ow};
    }
};

namespace detail {

// C (M x N) = A (M x K) * B (K x N). The k loop is the accumulation loop and
// always runs in ascending order, so every output element is reduced in a
// fixed order regardless of build or run.
template <typename T>
void gemm(const T* a, const T* b, T* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) crow[j] = T(0);
        const T* arow = a + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            T aik = arow[k];
            const T* brow = b + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C (K x N) = A (M x K)^T * B (M x N). Same fixed-order accumulation.
template <typename T>
void gemm_at(const T* a, const T* b, T* c, int M, int K, int N) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(K) * N; ++i) c[i] = T(0);
    for (int m = 0; m < M; ++m) {
        const T* arow = a + static_cast<std::size_t>(m) * K;
        const T* brow = b + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            T v = arow[k];
            T* crow = c + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += v * brow[j];
        }
    }
}

template <typename T>
void transpose(const T* a, T* at, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            at[static_cast<std::size_t>(c) * rows + r] = a[static_cast<std::size_t>(r) * cols + c];
}

// Patch matrix: row (ic*kh*kw + dy*kw + dx), column (oy*ow + ox). Out-of-range
// taps read as zero padding.
template <typename T>
Tensor<T> im2col(const Tensor<T>& in, const ConvSpec& s, int oh, int ow) {
    const int H = in.shape[1], W = in.shape[2];
    const int K = s.in_c * s.kh * s.kw;
    const int N = oh * ow;
    Tensor<T> col({K, N});
    T* out = col.ptr();
    for (int ic = 0; ic < s.in_c; ++ic) {
        const T* plane = in.ptr() + static_cast<std::size_t>(ic) * H * W;
        for (int dy = 0; dy < s.kh; ++dy) {
            for (int dx = 0; dx < s.kw; ++dx) {
                T* row = out + static_cast<std::size_t>((ic * s.kh + dy) * s.kw + dx) * N;
                for (int oy = 0; oy < oh; ++oy) {
                    int y = oy * s.sh - s.ph + dy;
                    if (y < 0 || y >= H) {
                        for (int ox = 0; ox < ow; ++ox) row[oy * ow + ox] = T(0);
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(y) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        int x = ox * s.sw - s.pw + dx;
                        row[oy * ow + ox] = (x >= 0 && x < W) ? src[x] : T(0);
                    }
                }
            }
        }
    }
    return col;
}

// Adjoint of im2col: scatter-add patch rows back into an image. Iteration
// order is fixed, so repeated taps on one pixel accumulate identically on
// every run.
template <typename T>
Tensor<T> col2im(const Tensor<T>& col, const ConvSpec& s, int H, int W, int oh, int ow) {
    Tensor<T> img({s.in_c, H, W});
    const int N = oh * ow;
    for (int ic = 0; ic < s.in_c; ++ic) {
        T* plane = img.ptr() + static_cast<std::size_t>(ic) * H * W;
        for (int dy = 0; dy < s.kh; ++dy) {
            for (int dx = 0; dx < s.kw; ++dx) {
                const T* row = col.ptr() + static_cast<std::size_t>((ic * s.kh + dy) * s.kw + dx) * N;
                for (int oy = 0; oy < oh; ++oy) {
                    int y = oy * s.sh - s.ph + dy;
                    if (y < 0 || y >= H) continue;
                    T* dst = plane + static_cast<std::size_t>(y) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        int x = ox * s.sw - s.pw + dx;
                        if (x >= 0 && x < W) dst[x] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
    return img;
}

} // namespace detail

// Strided cross-correlation (no kernel flip), zero padding.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const ConvSpec& s, const Tensor<T>& weights,
                         const Tensor<T>& bias, const char* what = "conv2d") {
    require_rank(in, 3, what);
    if (in.shape[0] != s.in_c)
        throw ShapeError(std::string(what) + ": input has " + std::to_string(in.shape[0]) +
                         " channels, layer expects " + std::to_string(s.in_c));
    require_shape(weights, {s.out_c, s.in_c, s.kh, s.kw}, what);
    require_shape(bias, {s.out_c}, what);
    auto [oh, ow] = s.conv_out(in.shape[1], in.shape[2], what);

    Tensor<T> col = detail::im2col(in, s, oh, ow);
    Tensor<T> out({s.out_c, oh, ow});
    const int K = s.in_c * s.kh * s.kw;
    detail::gemm(weights.ptr(), col.ptr(), out.ptr(), s.out_c, K, oh * ow);
    for (int oc = 0; oc < s.out_c; ++oc) {
        T b = bias[oc];
        T* plane = out.ptr() + static_cast<std::size_t>(oc) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) plane[i] += b;
    }
    return out;
}

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& in, const ConvSpec& s,
                             const Tensor<T>& weights, const char* what = "conv2d") {
    auto [oh, ow] = s.conv_out(in.shape[1], in.shape[2], what);
    require_shape(grad_out, {s.out_c, oh, ow}, what);
    const int K = s.in_c * s.kh * s.kw;
    const int N = oh * ow;

    ConvGrads<T> g;
    g.bias = Tensor<T>({s.out_c});
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* plane = grad_out.ptr() + static_cast<std::size_t>(oc) * N;
        T acc = T(0);
        for (int i = 0; i < N; ++i) acc += plane[i];
        g.bias[oc] = acc;
    }

    Tensor<T> col = detail::im2col(in, s, oh, ow);
    Tensor<T> colt({N, K});
    detail::transpose(col.ptr(), colt.ptr(), K, N);
    g.weights = Tensor<T>({s.out_c, s.in_c, s.kh, s.kw});
    detail::gemm(grad_out.ptr(), colt.ptr(), g.weights.ptr(), s.out_c, N, K);

    Tensor<T> gcol({K, N});
    detail::gemm_at(weights.ptr(), grad_out.ptr(), gcol.ptr(), s.out_c, K, N);
    g.input = detail::col2im(gcol, s, in.shape[1], in.shape[2], oh, ow);
    return g;
}

// Transpose convolution: the exact adjoint of conv2d_forward with the same
// geometry, plus a bias. Weights are laid out (in_c, out_c, kh, kw).
template <typename T>
Tensor<T> tconv2d_forward(const Tensor<T>& in, const ConvSpec& s, const Tensor<T>& weights,
                          const Tensor<T>& bias, const char* what = "tconv2d") {
    require_rank(in, 3, what);
    if (in.shape[0] != s.in_c)
        throw ShapeError(std::string(what) + ": input has " + std::to_string(in.shape[0]) +
                         " channels, layer expects " + std::to_string(s.in_c));
    require_shape(weights, {s.in_c, s.out_c, s.kh, s.kw}, what);
    require_shape(bias, {s.out_c}, what);
    const int H = in.shape[1], W = in.shape[2];
    auto [oh, ow] = s.tconv_out(H, W, what);

    // Scatter view: the forward pass is col2im of W^T * x, i.e. the
    // backward-input path of a conv going the other way.
    ConvSpec adj = s;
    adj.in_c = s.out_c;
    adj.out_c = s.in_c;
    const int K = s.out_c * s.kh * s.kw;
    const int N = H * W;
    Tensor<T> gcol({K, N});
    detail::gemm_at(weights.ptr(), in.ptr(), gcol.ptr(), s.in_c, K, N);
    Tensor<T> out = detail::col2im(gcol, adj, oh, ow, H, W);
    for (int oc = 0; oc < s.out_c; ++oc) {
        T b = bias[oc];
        T* plane = out.ptr() + static_cast<std::size_t>(oc) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) plane[i] += b;
    }
    return out;
}

template <typename T>
ConvGrads<T> tconv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& in, const ConvSpec& s,
                              const Tensor<T>& weights, const char* what = "tconv2d") {
    const int H = in.shape[1], W = in.shape[2];
    auto [oh, ow] = s.tconv_out(H, W, what);
    require_shape(grad_out, {s.out_c, oh, ow}, what);

    ConvSpec adj = s;
    adj.in_c = s.out_c;
    adj.out_c = s.in_c;
    const int K = s.out_c * s.kh * s.kw;
    const int N = H * W;

    ConvGrads<T> g;
    g.bias = Tensor<T>({s.out_c});
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* plane = grad_out.ptr() + static_cast<std::size_t>(oc) * oh * ow;
        T acc = T(0);
        for (int i = 0; i < oh * ow; ++i) acc += plane[i];
        g.bias[oc] = acc;
    }

    Tensor<T> col = detail::im2col(grad_out, adj, H, W);

    g.input = Tensor<T>({s.in_c, H, W});
    detail::gemm(weights.ptr(), col.ptr(), g.input.ptr(), s.in_c, K, N);

    Tensor<T> colt({N, K});
    detail::transpose(col.ptr(), colt.ptr(), K, N);
    g.weights = Tensor<T>({s.in_c, s.out_c, s.kh, s.kw});
    detail::gemm(in.ptr(), colt.ptr(), g.weights.ptr(), s.in_c, N, K);
    return g;
}

// Fully connected layer on rank-1 tensors. Weights (out, in), bias (out).
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& in, const Tensor<T>& weights, const Tensor<T>& bias,
                        const char* what = "dense") {
    require_rank(in, 1, what);
    require_rank(weights, 2, what);
    if (weights.shape[1] != in.shape[0])
        throw ShapeError(std::string(what) + ": input width " + std::to_string(in.shape[0]) +
                         " does not match weights " + shape_str(weights.shape));
    require_shape(bias, {weights.shape[0]}, what);
    const int out_n = weights.shape[0], in_n = in.shape[0];
    Tensor<T> out({out_n});
    for (int o = 0; o < out_n; ++o) {
        const T* wrow = weights.ptr() + static_cast<std::size_t>(o) * in_n;
        T acc = bias[o];
        for (int i = 0; i < in_n; ++i) acc += wrow[i] * in[i];
        out[o] = acc;
    }
    return out;
}

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& in,
                             const Tensor<T>& weights, const char* what = "dense") {
    require_shape(grad_out, {weights.shape[0]}, what);
    const int out_n = weights.shape[0], in_n = weights.shape[1];
    DenseGrads<T> g;
    g.bias = grad_out;
    g.weights = Tensor<T>({out_n, in_n});
    for (int o = 0; o < out_n; ++o) {
        T go = grad_out[o];
        T* wrow = g.weights.ptr() + static_cast<std::size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) wrow[i] = go * in[i];
    }
    g.input = Tensor<T>({in_n});
    for (int i = 0; i < in_n; ++i) {
        T acc = T(0);
        for (int o = 0; o < out_n; ++o)
            acc += weights[static_cast<std::size_t>(o) * in_n + i] * grad_out[o];
        g.input[i] = acc;
    }
    return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& in) {
    Tensor<T> out = in;
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& preact) {
    require_shape(grad_out, preact.shape, "relu");
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (preact[i] <= T(0)) g[i] = T(0);
    return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& in) {
    Tensor<T> out = in;
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return out;
}

// Derivative from the cached activation: y * (1 - y).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& activated) {
    require_shape(grad_out, activated.shape, "sigmoid");
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        g[i] *= activated[i] * (T(1) - activated[i]);
    return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b, const char* what = "concat") {
    require_rank(a, 3, what);
    require_rank(b, 3, what);
    if (a.shape[1] != b.shape[1] || a.shape[2] != b.shape[2])
        throw ShapeError(std::string(what) + ": spatial sizes differ, " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
    Tensor<T> out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int first_c) {
    Tensor<T> a({first_c, g.shape[1], g.shape[2]});
    Tensor<T> b({g.shape[0] - first_c, g.shape[1], g.shape[2]});
    std::copy(g.data.begin(), g.data.begin() + a.data.size(), a.data.begin());
    std::copy(g.data.begin() + a.data.size(), g.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;
};

// Squared-error loss summed over all elements and divided by n, the number of
// samples in the batch. Per-pixel averaging is deliberately not applied.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, int n = 1,
                       const char* what = "mse_loss") {
    require_shape(pred, target.shape, what);
    if (n <= 0) throw ShapeError(std::string(what) + ": batch size must be positive");
    LossResult<T> r;
    r.grad = Tensor<T>(pred.shape);
    double acc = 0.0;
    const T scale = T(2) / static_cast<T>(n);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        T d = pred[i] - target[i];
        acc += static_cast<double>(d) * static_cast<double>(d);
        r.grad[i] = scale * d;
    }
    r.loss = acc / n;
    return r;
}

} // namespace solewear
