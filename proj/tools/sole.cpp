// sole: generate, clean, train on, and score synthetic outsole impressions.
//
// One binary, subcommand style. Every run prints its resolved configuration
// so a log line is enough to reproduce it. Exit codes: 0 success, 2 usage or
// bad configuration, 3 file I/O, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "solewear/checkpoint.hpp"
#include "solewear/dataset.hpp"
#include "solewear/denoise.hpp"
#include "solewear/gradcheck.hpp"
#include "solewear/metrics.hpp"
#include "solewear/network.hpp"
#include "solewear/synth.hpp"
#include "solewear/train.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

using namespace solewear;

void log_kv(const std::string& key, const std::string& value) {
    std::cout << "config: " << key << "=" << value << "\n";
}
void log_kv(const std::string& key, double value) { std::cout << "config: " << key << "=" << value << "\n"; }
void log_kv(const std::string& key, std::int64_t value) { std::cout << "config: " << key << "=" << value << "\n"; }

// Translation-only alignment: shift `img` by the integer offset that
// maximizes cross-correlation with `ref` (zero fill outside). Simple
// plumbing for inputs that were lifted off-center.
Image align_translate(const Image& img, const Image& ref, int max_shift) {
    if (img.width != ref.width || img.height != ref.height)
        throw ShapeError("align: image dims differ from reference");
    int best_dx = 0, best_dy = 0;
    double best = -1e300;
    for (int dy = -max_shift; dy <= max_shift; ++dy)
        for (int dx = -max_shift; dx <= max_shift; ++dx) {
            double c = 0;
            for (int y = std::max(0, dy); y < img.height + std::min(0, dy); ++y)
                for (int x = std::max(0, dx); x < img.width + std::min(0, dx); ++x)
                    c += static_cast<double>(ref.at(y, x)) * img.at(y - dy, x - dx);
            if (c > best) {
                best = c;
                best_dx = dx;
                best_dy = dy;
            }
        }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int sy = y - best_dy, sx = x - best_dx;
            out.at(y, x) = (sy >= 0 && sy < img.height && sx >= 0 && sx < img.width)
                               ? img.at(sy, sx)
                               : 0.f;
        }
    std::cout << "aligned: shift dx=" << best_dx << " dy=" << best_dy << "\n";
    return out;
}

int cmd_generate(std::uint64_t seed, const std::string& out_dir, int height, int width,
                 int blocks, double dot_density, double ridge_fraction, double hole_fraction,
                 double wear_scale, double noise_intensity, int out_height, int out_width) {
    OutsoleSpec spec;
    spec.seed = seed;
    spec.height = height;
    spec.width = width;
    spec.block_count = blocks;
    spec.dot_density = dot_density;
    spec.ridge_fraction = ridge_fraction;
    spec.hole_fraction = hole_fraction;
    spec.wear_scale = wear_scale;

    log_kv("seed", static_cast<std::int64_t>(seed));
    log_kv("out", out_dir);
    log_kv("canvas", std::to_string(height) + "x" + std::to_string(width));
    log_kv("blocks", static_cast<std::int64_t>(blocks));
    log_kv("dot_density", dot_density);
    log_kv("ridge_fraction", ridge_fraction);
    log_kv("hole_fraction", hole_fraction);
    log_kv("wear_scale", wear_scale);
    log_kv("noise_intensity", noise_intensity);
    if (out_height > 0) log_kv("downsample", std::to_string(out_height) + "x" + std::to_string(out_width));

    NoiseSpec noise;
    noise.intensity = noise_intensity;
    EmitResult res = emit_dataset(spec, out_dir, noise_intensity > 0 ? &noise : nullptr,
                                  out_width, out_height);
    std::cout << "wrote " << res.clean_files << " clean and " << res.noisy_files
              << " noisy impressions under " << out_dir << "\n";
    std::cout << "manifest: " << res.manifest << "\n";
    if (!res.noisy_manifest.empty()) std::cout << "noisy manifest: " << res.noisy_manifest << "\n";
    return 0;
}

int cmd_denoise(const std::string& manifest, const std::string& out_dir, DenoiseParams params,
                bool no_scale, bool dump_masks) {
    namespace fs = std::filesystem;
    auto records = load_manifest(manifest);
    fs::create_directories(out_dir);

    log_kv("manifest", manifest);
    log_kv("out", out_dir);
    log_kv("threshold_window", static_cast<std::int64_t>(params.threshold_window));
    log_kv("threshold_offset", params.threshold_offset);
    log_kv("min_area", static_cast<std::int64_t>(params.min_area));
    log_kv("dilate_radius", static_cast<std::int64_t>(params.dilate_radius));
    log_kv("avg_kernel", static_cast<std::int64_t>(params.avg_kernel));
    log_kv("block_threshold", params.block_threshold);
    log_kv("scale_params", no_scale ? "off" : "on");
    log_kv("dump_masks", dump_masks ? "on" : "off");

    std::string out_manifest = (fs::path(out_dir) / "manifest_denoised.jsonl").string();
    std::ofstream mf(out_manifest);
    if (!mf) throw IoError("cannot open for writing: " + out_manifest);

    int total_unrepaired = 0;
    for (const auto& rec : records) {
        DenoiseParams p = params;
        if (no_scale) {
            p.reference_width = rec.image.width;
            p.reference_height = rec.image.height;
        }
        PipelineResult r = denoise_pipeline(rec.image, p);
        total_unrepaired += r.unrepaired_blocks;

        std::string stem = fs::path(rec.file).stem().string();
        std::string out_name = stem + "_dn.pgm";
        write_pgm(r.image, (fs::path(out_dir) / out_name).string());
        if (dump_masks) {
            Image noise_mask(rec.image.width, rec.image.height);
            for (std::size_t i = 0; i < noise_mask.pixels.size(); ++i)
                noise_mask.pixels[i] = r.map.noise.v[i] ? 1.f : 0.f;
            write_pgm(noise_mask, (fs::path(out_dir) / (stem + "_noise.pgm")).string());
            Image label_img(rec.image.width, rec.image.height);
            for (std::size_t i = 0; i < label_img.pixels.size(); ++i)
                label_img.pixels[i] = r.map.blocks.labels[i] >= 0
                                          ? 0.2f + 0.8f * ((r.map.blocks.labels[i] % 13) / 12.f)
                                          : 0.f;
            write_pgm(label_img, (fs::path(out_dir) / (stem + "_blocks.pgm")).string());
        }
        append_manifest_line(mf, rec.week, rec.side, out_name, true);
        if (r.unrepaired_blocks > 0)
            std::cout << rec.file << ": " << r.unrepaired_blocks
                      << " fully covered block(s) left untouched\n";
    }
    std::cout << "denoised " << records.size() << " impressions -> " << out_manifest << "\n";
    if (total_unrepaired > 0)
        std::cout << "total unrepaired blocks: " << total_unrepaired << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& variant_str, int epochs, double lr,
              int batch, std::uint64_t seed, const std::string& checkpoint_path,
              const std::string& loss_csv, int checkpoint_every, std::vector<int> channels,
              int delta_hidden, int delta_channels, bool full_preset, bool quiet) {
    auto records = load_manifest(manifest);
    Variant variant = variant_from_name(variant_str);

    ExperimentConfig cfg;
    if (full_preset) cfg.net = NetworkConfig::full();
    cfg.net.variant = variant;
    if (!records.empty()) {
        cfg.net.input_height = records.front().image.height;
        cfg.net.input_width = records.front().image.width;
    }
    if (!channels.empty()) {
        if (channels.size() != kStages)
            throw ConfigError("train: --channels needs " + std::to_string(kStages) + " values");
        for (int i = 0; i < kStages; ++i) cfg.net.channels[i] = channels[i];
    }
    if (delta_hidden > 0) cfg.net.delta_hidden = delta_hidden;
    if (delta_channels > 0) cfg.net.delta_channels = delta_channels;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.seed = seed;
    cfg.checkpoint_path = checkpoint_path;
    cfg.loss_csv_path = loss_csv;
    cfg.checkpoint_every = checkpoint_every;
    cfg.validate();

    DatasetSplit split = split_dataset(records, variant);
    SampleSet samples = make_samples(split.train, variant);

    log_kv("manifest", manifest);
    log_kv("variant", variant_name(variant));
    log_kv("input", std::to_string(cfg.net.input_height) + "x" + std::to_string(cfg.net.input_width));
    {
        std::string ch;
        for (int c : cfg.net.channels) ch += (ch.empty() ? "" : ",") + std::to_string(c);
        log_kv("channels", ch);
    }
    log_kv("delta_hidden", static_cast<std::int64_t>(cfg.net.delta_hidden));
    log_kv("delta_channels", static_cast<std::int64_t>(cfg.net.delta_channels));
    log_kv("epochs", static_cast<std::int64_t>(cfg.epochs));
    log_kv("learning_rate", cfg.learning_rate);
    log_kv("batch_size", static_cast<std::int64_t>(cfg.batch_size));
    log_kv("seed", static_cast<std::int64_t>(cfg.seed));
    log_kv("checkpoint", cfg.checkpoint_path.empty() ? "(none)" : cfg.checkpoint_path);
    log_kv("loss_csv", cfg.loss_csv_path.empty() ? "(none)" : cfg.loss_csv_path);
    std::cout << "records: " << records.size() << " (train weeks " << split.train.size()
              << " records, test " << split.test.size() << "); training pairs: "
              << samples.size() << "\n";

    int log_every = std::max(1, epochs / 20);
    TrainResult result = train(cfg, samples, [&](int epoch, double loss) {
        if (!quiet && (epoch % log_every == 0 || epoch == epochs - 1))
            std::cout << "epoch " << epoch << " loss " << loss << "\n";
    });
    std::cout << "final loss " << result.loss_curve.back() << "\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& input_path, int delta,
                int input_week, const std::string& out_path, const std::string& register_to) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    require_variant(ck.params, Variant::Forward);
    Image img = read_pgm(input_path);
    if (!register_to.empty()) img = align_translate(img, read_pgm(register_to), 16);

    log_kv("checkpoint", checkpoint_path);
    log_kv("input", input_path);
    log_kv("delta", static_cast<std::int64_t>(delta));
    if (input_week >= 0) log_kv("input_week", static_cast<std::int64_t>(input_week));
    log_kv("out", out_path);

    if (input_week >= 0 && input_week + delta > kMaxWeek)
        std::cout << "warning: target week " << input_week + delta << " is beyond week "
                  << kMaxWeek << "; prediction is unverifiable against observations\n";

    Image out = predict(ck.params, img, DeltaEncoding::scalar(delta));
    write_pgm(out, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_reconstruct(const std::string& checkpoint_path, const std::string& input_path, int week,
                    const std::string& out_path, const std::string& register_to) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    require_variant(ck.params, Variant::Backward);
    Image img = read_pgm(input_path);
    if (!register_to.empty()) img = align_translate(img, read_pgm(register_to), 16);

    log_kv("checkpoint", checkpoint_path);
    log_kv("input", input_path);
    log_kv("week", static_cast<std::int64_t>(week));
    log_kv("out", out_path);

    Image out = predict(ck.params, img, DeltaEncoding::one_hot_week(week));
    write_pgm(out, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& manifest, int window,
                 const std::string& out_csv, bool with_persistence) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    auto records = load_manifest(manifest);
    Variant variant = ck.params.config.variant;
    DatasetSplit split = split_dataset(records, variant);
    SampleSet eval_samples = make_eval_samples(records, split, variant);

    log_kv("checkpoint", checkpoint_path);
    log_kv("manifest", manifest);
    log_kv("variant", variant_name(variant));
    log_kv("ssim_window", static_cast<std::int64_t>(window));
    log_kv("out_csv", out_csv.empty() ? "(none)" : out_csv);
    std::cout << "evaluation pairs: " << eval_samples.size() << "\n";

    std::vector<MetricReport> reports;
    reports.push_back(evaluate(ck.params, eval_samples, "model", window));
    if (with_persistence)
        reports.push_back(persistence_report(eval_samples, "persistence", window));
    std::cout << format_report_tables(reports);
    if (!out_csv.empty()) {
        write_report_csv(reports.front(), out_csv);
        std::cout << "wrote " << out_csv << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    log_kv("seed", static_cast<std::int64_t>(seed));
    bool ok = true;
    for (const GradCheckResult& r : run_layer_gradchecks(seed)) {
        bool pass = r.max_rel_err < 1e-5;
        ok = ok && pass;
        std::printf("%-24s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                    pass ? "ok" : "FAIL");
    }
    GradCheckResult net = run_network_gradcheck(seed);
    bool net_pass = net.max_rel_err < 1e-4;
    ok = ok && net_pass;
    std::printf("%-24s max rel err %.3e  %s\n", net.name.c_str(), net.max_rel_err,
                net_pass ? "ok" : "FAIL");
    if (!ok) throw NumericError("gradient check failed");
    std::cout << "all gradient checks passed\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic outsole wear: generation, denoising, training, prediction"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from an INI file (flags override)");

    // generate
    auto* gen = app.add_subcommand("generate", "Emit a fortnightly impression dataset");
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    int gen_h = 640, gen_w = 256, gen_blocks = 63;
    double gen_dots = 1.0, gen_ridge = 0.35, gen_holes = 0.30, gen_wear = 1.0, gen_noise = 1.0;
    int gen_oh = 0, gen_ow = 0;
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--height", gen_h, "Canvas height (multiple of 32)");
    gen->add_option("--width", gen_w, "Canvas width (multiple of 32)");
    gen->add_option("--blocks", gen_blocks, "Tread block count");
    gen->add_option("--dot-density", gen_dots, "Dot feature density scale");
    gen->add_option("--ridge-fraction", gen_ridge, "Fraction of adjacent block pairs bridged");
    gen->add_option("--hole-fraction", gen_holes, "Fraction of blocks carrying a hole");
    gen->add_option("--wear-scale", gen_wear, "Global wear rate multiplier");
    gen->add_option("--noise-intensity", gen_noise, "Debris amount for noisy copies (0 = clean only)");
    gen->add_option("--out-height", gen_oh, "Downsample output to this height");
    gen->add_option("--out-width", gen_ow, "Downsample output to this width");

    // denoise
    auto* dn = app.add_subcommand("denoise", "Clean a manifest of impressions");
    std::string dn_manifest, dn_out;
    DenoiseParams dn_params;
    bool dn_noscale = false, dn_dump = false;
    dn->add_option("--manifest", dn_manifest, "Input manifest (JSON lines)")->required();
    dn->add_option("--out", dn_out, "Output directory")->required();
    dn->add_option("--window", dn_params.threshold_window, "Adaptive threshold window (reference scale)");
    dn->add_option("--offset", dn_params.threshold_offset, "Adaptive threshold offset");
    dn->add_option("--min-area", dn_params.min_area, "Smallest debris component kept (reference scale)");
    dn->add_option("--dilate-radius", dn_params.dilate_radius, "Noise mask dilation radius");
    dn->add_option("--kernel", dn_params.avg_kernel, "Averaging window for repairs (reference scale)");
    dn->add_option("--block-threshold", dn_params.block_threshold, "Foreground brightness cut");
    dn->add_flag("--no-scale", dn_noscale, "Use parameters as-is instead of scaling by resolution");
    dn->add_flag("--dump-masks", dn_dump, "Also write noise and block-label masks");

    // train
    auto* tr = app.add_subcommand("train", "Train a wear model on a manifest");
    std::string tr_manifest, tr_variant = "forward", tr_ckpt = "model.ckpt", tr_csv;
    int tr_epochs = 2000, tr_batch = 0, tr_every = 0, tr_dh = 0, tr_dc = 0;
    double tr_lr = 1e-5;
    std::uint64_t tr_seed = 1;
    std::vector<int> tr_channels;
    bool tr_full = false, tr_quiet = false;
    tr->add_option("--manifest", tr_manifest, "Training manifest (JSON lines)")->required();
    tr->add_option("--variant", tr_variant, "forward (age by delta) or backward (restore to week)");
    tr->add_option("--epochs", tr_epochs, "Training epochs");
    tr->add_option("--lr", tr_lr, "Adam learning rate");
    tr->add_option("--batch", tr_batch, "Batch size (0 = full batch)");
    tr->add_option("--seed", tr_seed, "Initialization and shuffling seed");
    tr->add_option("--checkpoint", tr_ckpt, "Checkpoint output path");
    tr->add_option("--loss-csv", tr_csv, "Write per-epoch loss curve CSV here");
    tr->add_option("--checkpoint-every", tr_every, "Also checkpoint every N epochs");
    tr->add_option("--channels", tr_channels, "Five encoder channel counts")->delimiter(',');
    tr->add_option("--delta-hidden", tr_dh, "Delta branch hidden width");
    tr->add_option("--delta-channels", tr_dc, "Delta branch bottleneck channels");
    tr->add_flag("--full", tr_full, "Full-resolution preset (640x256, channels 32..512)");
    tr->add_flag("--quiet", tr_quiet, "Suppress per-epoch loss lines");

    // predict
    auto* pr = app.add_subcommand("predict", "Age an impression forward by --delta weeks");
    std::string pr_ckpt, pr_in, pr_out = "predicted.pgm", pr_reg;
    int pr_delta = 0, pr_week = -1;
    pr->add_option("--checkpoint", pr_ckpt, "Forward-variant checkpoint")->required();
    pr->add_option("--input", pr_in, "Input impression (PGM)")->required();
    pr->add_option("--delta", pr_delta, "Weeks to advance (even)")->required();
    pr->add_option("--input-week", pr_week, "Week the input was taken (enables range warnings)");
    pr->add_option("--out", pr_out, "Output image path");
    pr->add_option("--register-to", pr_reg, "Align input to this reference image first");

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "Restore an impression to --week");
    std::string rc_ckpt, rc_in, rc_out = "reconstructed.pgm", rc_reg;
    int rc_week = 0;
    rc->add_option("--checkpoint", rc_ckpt, "Backward-variant checkpoint")->required();
    rc->add_option("--input", rc_in, "Input impression (PGM)")->required();
    rc->add_option("--week", rc_week, "Target week (even, 0..52)")->required();
    rc->add_option("--out", rc_out, "Output image path");
    rc->add_option("--register-to", rc_reg, "Align input to this reference image first");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on held-out weeks");
    std::string ev_ckpt, ev_manifest, ev_csv;
    int ev_window = 8;
    bool ev_persist = true;
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint to score")->required();
    ev->add_option("--manifest", ev_manifest, "Dataset manifest (JSON lines)")->required();
    ev->add_option("--window", ev_window, "SSIM window (0 = whole image)");
    ev->add_option("--out-csv", ev_csv, "Write per-pair scores CSV here");
    ev->add_flag("--persistence,!--no-persistence", ev_persist,
                 "Also report the no-change baseline");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks for every layer");
    std::uint64_t gc_seed = 17;
    gc->add_option("--seed", gc_seed, "Probe seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(gen_seed, gen_out, gen_h, gen_w, gen_blocks, gen_dots, gen_ridge,
                                gen_holes, gen_wear, gen_noise, gen_oh, gen_ow);
        if (dn->parsed()) return cmd_denoise(dn_manifest, dn_out, dn_params, dn_noscale, dn_dump);
        if (tr->parsed())
            return cmd_train(tr_manifest, tr_variant, tr_epochs, tr_lr, tr_batch, tr_seed, tr_ckpt,
                             tr_csv, tr_every, tr_channels, tr_dh, tr_dc, tr_full, tr_quiet);
        if (pr->parsed()) return cmd_predict(pr_ckpt, pr_in, pr_delta, pr_week, pr_out, pr_reg);
        if (rc->parsed()) return cmd_reconstruct(rc_ckpt, rc_in, rc_week, rc_out, rc_reg);
        if (ev->parsed()) return cmd_evaluate(ev_ckpt, ev_manifest, ev_window, ev_csv, ev_persist);
        if (gc->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
