#pragma once

#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "network.hpp"

namespace solewear {

struct ExperimentConfig {
    NetworkConfig net;
    double learning_rate = 1e-5;
    int epochs = 2000;            // desk default; the full-scale run uses 10000
    int batch_size = 0;           // 0 = full batch
    std::uint64_t seed = 1;
    int checkpoint_every = 0;     // 0 = only at the end
    std::string checkpoint_path;  // empty = no checkpoint written
    std::string loss_csv_path;    // empty = no curve written

    void validate() const {
        net.validate();
        if (learning_rate <= 0) throw ConfigError("train: learning rate must be positive");
        if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
        if (batch_size < 0) throw ConfigError("train: batch size cannot be negative");
        if (checkpoint_every < 0) throw ConfigError("train: checkpoint interval cannot be negative");
    }
};

struct TrainResult {
    ModelParams<float> params;
    std::vector<double> loss_curve;  // per-epoch mean of the squared-error objective
};

inline void write_loss_csv(const std::vector<double>& curve, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "epoch,mean_loss\n";
    f.precision(10);
    for (std::size_t i = 0; i < curve.size(); ++i) f << i + 1 << "," << curve[i] << "\n";
    if (!f) throw IoError("short write: " + path);
}

// Minimizes the batch-averaged squared-error objective with Adam. The sample
// order reshuffles every epoch from the run seed, so a (seed, config, data)
// triple fully determines the result.
inline TrainResult train(const ExperimentConfig& cfg, const SampleSet& samples,
                         const std::function<void(int, double)>& on_epoch = {}) {
    cfg.validate();
    if (samples.size() == 0) throw DatasetError("train: empty sample set");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Image& x = samples.X(i);
        if (x.height != cfg.net.input_height || x.width != cfg.net.input_width)
            throw ConfigError("train: sample image " + std::to_string(x.width) + "x" +
                              std::to_string(x.height) + " does not match network input " +
                              std::to_string(cfg.net.input_width) + "x" +
                              std::to_string(cfg.net.input_height));
    }

    TrainResult result;
    result.params = build_model<float>(cfg.net, cfg.seed);
    ModelParams<float>& p = result.params;

    const int n = static_cast<int>(samples.size());
    const int batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
    const float lr = static_cast<float>(cfg.learning_rate);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<Tensor<float>> x_cache(n), y_cache(n);
    for (int i = 0; i < n; ++i) {
        x_cache[i] = samples.X(i).to_tensor<float>();
        y_cache[i] = samples.Y(i).to_tensor<float>();
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Pcg32 shuffle_rng(cfg.seed ^ 0x5157ee14u, static_cast<std::uint64_t>(epoch));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(shuffle_rng.next_below(i + 1))]);

        double epoch_sq_sum = 0.0;
        for (int start = 0; start < n; start += batch) {
            int end = std::min(start + batch, n);
            int bn = end - start;

            ModelGrads<float> acc;
            bool first = true;
            for (int k = start; k < end; ++k) {
                int s = order[k];
                ForwardCache<float> cache;
                Tensor<float> out = forward(p, x_cache[s], samples.delta(s), &cache);
                LossResult<float> r = mse_loss(out, y_cache[s], bn);
                epoch_sq_sum += r.loss * bn;  // undo the 1/bn to accumulate raw squared error
                ModelGrads<float> g = backward(p, cache, r.grad);
                if (first) {
                    acc = std::move(g);
                    first = false;
                } else {
                    auto add = [](Tensor<float>& dst, const Tensor<float>& src) {
                        for (std::size_t i = 0; i < dst.data.size(); ++i) dst[i] += src[i];
                    };
                    for (int i = 0; i < kStages; ++i) {
                        add(acc.enc_w[i], g.enc_w[i]);
                        add(acc.enc_b[i], g.enc_b[i]);
                        add(acc.dec_w[i], g.dec_w[i]);
                        add(acc.dec_b[i], g.dec_b[i]);
                    }
                    for (int i = 0; i < 2; ++i) {
                        add(acc.del_w[i], g.del_w[i]);
                        add(acc.del_b[i], g.del_b[i]);
                    }
                }
            }
            acc.zip(p, [&](Tensor<float>& param, Tensor<float>& grad, AdamState<float>& st) {
                adam_step(param, grad, st, lr);
            });
        }

        double mean_loss = epoch_sq_sum / n;
        if (!std::isfinite(mean_loss))
            throw NumericError("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
        result.loss_curve.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss);

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            epoch % cfg.checkpoint_every == 0)
            save_checkpoint(p, cfg.seed, cfg.checkpoint_path);
    }

    if (!cfg.checkpoint_path.empty()) save_checkpoint(p, cfg.seed, cfg.checkpoint_path);
    if (!cfg.loss_csv_path.empty()) write_loss_csv(result.loss_curve, cfg.loss_csv_path);
    return result;
}

} // namespace solewear
