#pragma once

#include <functional>
#include <string>
#include <vector>

#include "layers.hpp"
#include "network.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace solewear {

// Central-difference verification of analytic gradients, always in double.
// Used by the test suite and the gradcheck CLI command.

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
};

namespace detail {

inline double rel_err(double analytic, double numeric, double floor = 1e-8) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    double diff = std::abs(analytic - numeric);
    return diff == 0.0 ? 0.0 : diff / denom;
}

} // namespace detail

// Perturbs every element of every listed tensor and compares the numeric
// slope of loss_fn against the matching analytic gradient. `floor` guards
// the relative-error denominator: elements whose true and numeric slopes are
// both below it count as agreeing, which keeps central-difference roundoff
// (of order eps * loss / h) from dominating on dead paths.
inline double max_grad_error(const std::vector<Tensor<double>*>& params,
                             const std::vector<const Tensor<double>*>& analytic,
                             const std::function<double()>& loss_fn, double h = 1e-5,
                             double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor<double>& t = *params[p];
        const Tensor<double>& g = *analytic[p];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            double saved = t[i];
            t[i] = saved + h;
            double up = loss_fn();
            t[i] = saved - h;
            double down = loss_fn();
            t[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, detail::rel_err(g[i], numeric, floor));
        }
    }
    return worst;
}

namespace detail {

inline Tensor<double> random_tensor(const Shape& s, Pcg32& rng, double lo = -1.0,
                                    double hi = 1.0) {
    Tensor<double> t(s);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace detail

// Finite-difference suites over every layer primitive, squared-error loss
// against a random target as the scalar function.
inline std::vector<GradCheckResult> run_layer_gradchecks(std::uint64_t seed = 17) {
    std::vector<GradCheckResult> results;
    Pcg32 rng(seed);

    {
        ConvSpec s;
        s.in_c = 2;
        s.out_c = 3;
        Tensor<double> x = detail::random_tensor({2, 6, 8}, rng);
        Tensor<double> w = detail::random_tensor({3, 2, 4, 4}, rng, -0.5, 0.5);
        Tensor<double> b = detail::random_tensor({3}, rng, -0.2, 0.2);
        Tensor<double> target = detail::random_tensor({3, 3, 4}, rng);
        auto loss = [&] { return mse_loss(conv2d_forward(x, s, w, b), target).loss; };
        auto r = mse_loss(conv2d_forward(x, s, w, b), target);
        ConvGrads<double> g = conv2d_backward(r.grad, x, s, w);
        double e = max_grad_error({&x, &w, &b}, {&g.input, &g.weights, &g.bias}, loss);
        results.push_back({"conv2d", e});
    }
    {
        ConvSpec s;
        s.in_c = 3;
        s.out_c = 2;
        Tensor<double> x = detail::random_tensor({3, 3, 4}, rng);
        Tensor<double> w = detail::random_tensor({3, 2, 4, 4}, rng, -0.5, 0.5);
        Tensor<double> b = detail::random_tensor({2}, rng, -0.2, 0.2);
        Tensor<double> target = detail::random_tensor({2, 6, 8}, rng);
        auto loss = [&] { return mse_loss(tconv2d_forward(x, s, w, b), target).loss; };
        auto r = mse_loss(tconv2d_forward(x, s, w, b), target);
        ConvGrads<double> g = tconv2d_backward(r.grad, x, s, w);
        double e = max_grad_error({&x, &w, &b}, {&g.input, &g.weights, &g.bias}, loss);
        results.push_back({"tconv2d", e});
    }
    {
        Tensor<double> x = detail::random_tensor({7}, rng);
        Tensor<double> w = detail::random_tensor({5, 7}, rng, -0.5, 0.5);
        Tensor<double> b = detail::random_tensor({5}, rng, -0.2, 0.2);
        Tensor<double> target = detail::random_tensor({5}, rng);
        auto loss = [&] { return mse_loss(dense_forward(x, w, b), target).loss; };
        auto r = mse_loss(dense_forward(x, w, b), target);
        DenseGrads<double> g = dense_backward(r.grad, x, w);
        double e = max_grad_error({&x, &w, &b}, {&g.input, &g.weights, &g.bias}, loss);
        results.push_back({"dense", e});
    }
    {
        Tensor<double> x = detail::random_tensor({4, 5}, rng);
        // Keep activations away from the relu kink so the numeric slope is valid.
        for (double& v : x.data)
            if (std::abs(v) < 1e-3) v = 0.1;
        Tensor<double> target = detail::random_tensor({4, 5}, rng);
        auto loss = [&] { return mse_loss(relu(x), target).loss; };
        auto r = mse_loss(relu(x), target);
        Tensor<double> g = relu_backward(r.grad, x);
        results.push_back({"relu", max_grad_error({&x}, {&g}, loss)});
    }
    {
        Tensor<double> x = detail::random_tensor({4, 5}, rng, -2.0, 2.0);
        Tensor<double> target = detail::random_tensor({4, 5}, rng);
        auto loss = [&] { return mse_loss(sigmoid(x), target).loss; };
        auto r = mse_loss(sigmoid(x), target);
        Tensor<double> g = sigmoid_backward(r.grad, sigmoid(x));
        results.push_back({"sigmoid", max_grad_error({&x}, {&g}, loss)});
    }
    {
        Tensor<double> a = detail::random_tensor({2, 3, 4}, rng);
        Tensor<double> b = detail::random_tensor({3, 3, 4}, rng);
        Tensor<double> target = detail::random_tensor({5, 3, 4}, rng);
        auto loss = [&] { return mse_loss(concat_channels(a, b), target).loss; };
        auto r = mse_loss(concat_channels(a, b), target);
        auto [ga, gb] = split_channels(r.grad, 2);
        results.push_back({"concat", max_grad_error({&a, &b}, {&ga, &gb}, loss)});
    }
    return results;
}

namespace detail {

// Smallest |preactivation| across every relu in the cache. A realization
// with a preactivation inside the probe step straddles the kink and the
// central difference reads the gradient jump, not the gradient.
inline double kink_margin(const ForwardCache<double>& cache) {
    double margin = 1e300;
    for (int i = 0; i < kStages; ++i) {
        for (double z : cache.enc_z[i].data) margin = std::min(margin, std::abs(z));
        if (i + 1 < kStages)
            for (double z : cache.dec_z[i].data) margin = std::min(margin, std::abs(z));
    }
    for (int i = 0; i < 2; ++i)
        for (double z : cache.del_z[i].data) margin = std::min(margin, std::abs(z));
    return margin;
}

} // namespace detail

// Whole-network check on a deliberately tiny configuration.
//
// Probes are chosen so the finite differences stay meaningful through five
// relu compositions. Fresh-built models pin many preactivations exactly at
// the relu kink (zero biases plus dead receptive fields), where a central
// difference reads half the one-sided slope instead of the gradient, so the
// parameters are jittered to a general-position point and realizations whose
// smallest preactivation magnitude still sits within the probe step are
// skipped deterministically. The target sits near the initial output so
// roundoff in the loss does not drown small slopes, and the denominator
// floor turns near-dead elements into an absolute check at
// tolerance * floor granularity.
inline GradCheckResult run_network_gradcheck(std::uint64_t seed = 23) {
    NetworkConfig cfg;
    cfg.input_height = 32;
    cfg.input_width = 32;
    cfg.channels = {2, 3, 4, 5, 6};
    cfg.delta_hidden = 3;
    cfg.delta_channels = 2;
    cfg.variant = Variant::Forward;

    const double h = 1e-6, floor = 1e-5;

    Pcg32 rng(seed + 1);
    Tensor<double> x = detail::random_tensor({1, 32, 32}, rng, 0.0, 1.0);
    DeltaEncoding delta = DeltaEncoding::scalar(16);

    ModelParams<double> p;
    ForwardCache<double> cache;
    auto rebuild = [&](std::uint64_t s) {
        p = build_model<double>(cfg, s);
        Pcg32 jitter(s + 2);
        p.for_each([&](const std::string&, Tensor<double>& t, AdamState<double>&) {
            for (double& v : t.data) v += jitter.uniform(-0.05, 0.05);
        });
        return forward(p, x, delta, &cache);
    };
    Tensor<double> out = rebuild(seed);
    for (int tries = 0; detail::kink_margin(cache) < 4.0 * h && tries < 64; ++tries)
        out = rebuild(++seed);

    Tensor<double> target = out;
    for (double& v : target.data) v += rng.uniform(-0.02, 0.02);

    auto loss = [&] { return mse_loss(forward(p, x, delta), target).loss; };

    LossResult<double> r = mse_loss(out, target);
    ModelGrads<double> g = backward(p, cache, r.grad);

    std::vector<Tensor<double>*> params;
    std::vector<const Tensor<double>*> analytic;
    p.for_each([&](const std::string&, Tensor<double>& t, AdamState<double>&) {
        params.push_back(&t);
    });
    g.zip(p, [&](Tensor<double>&, Tensor<double>& gt, AdamState<double>&) {
        analytic.push_back(&gt);
    });
    return {"network", max_grad_error(params, analytic, loss, h, floor)};
}

} // namespace solewear
