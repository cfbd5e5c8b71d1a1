#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "image.hpp"
#include "network.hpp"

namespace solewear {

constexpr int kGlobalSsim = 0;

namespace detail {

struct WindowStats {
    double mean_f = 0, mean_g = 0, var_f = 0, var_g = 0, cov = 0;
};

inline WindowStats window_stats(const Image& f, const Image& g, int x0, int y0, int w, int h) {
    WindowStats s;
    double n = static_cast<double>(w) * h;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) {
            s.mean_f += f.at(y, x);
            s.mean_g += g.at(y, x);
        }
    s.mean_f /= n;
    s.mean_g /= n;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) {
            double df = f.at(y, x) - s.mean_f;
            double dg = g.at(y, x) - s.mean_g;
            s.var_f += df * df;
            s.var_g += dg * dg;
            s.cov += df * dg;
        }
    s.var_f /= n;
    s.var_g /= n;
    s.cov /= n;
    return s;
}

// Product of the luminance, contrast, and structure terms, clamped to [0,1]
// so anti-correlated structure scores zero rather than negative. With
// C3 = C2/2 the contrast and structure factors cancel into
// (2*cov + C2)/(var_f + var_g + C2); that form is used because it needs no
// square roots, so identical images score 1 to the last bit.
inline double ssim_terms(const WindowStats& s) {
    constexpr double L = 1.0;  // images live in [0,1]
    constexpr double C1 = (0.01 * L) * (0.01 * L);
    constexpr double C2 = (0.03 * L) * (0.03 * L);
    double l = (2 * s.mean_f * s.mean_g + C1) / (s.mean_f * s.mean_f + s.mean_g * s.mean_g + C1);
    double cs = (2 * s.cov + C2) / (s.var_f + s.var_g + C2);
    double v = l * cs;
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

} // namespace detail

// Structural similarity. window = kGlobalSsim evaluates the statistics once
// over the whole image; otherwise every window position (stride 1, uniform
// weights) is scored and the mean returned.
inline double ssim(const Image& f, const Image& g, int window = 8) {
    if (f.width != g.width || f.height != g.height)
        throw ShapeError("ssim: image sizes differ, " + std::to_string(f.width) + "x" +
                         std::to_string(f.height) + " vs " + std::to_string(g.width) + "x" +
                         std::to_string(g.height));
    if (window == kGlobalSsim)
        return detail::ssim_terms(detail::window_stats(f, g, 0, 0, f.width, f.height));
    if (window < 2 || window > f.width || window > f.height)
        throw ShapeError("ssim: window " + std::to_string(window) + " does not fit " +
                         std::to_string(f.width) + "x" + std::to_string(f.height));
    double acc = 0.0;
    long long count = 0;
    for (int y = 0; y + window <= f.height; ++y)
        for (int x = 0; x + window <= f.width; ++x) {
            acc += detail::ssim_terms(detail::window_stats(f, g, x, y, window, window));
            ++count;
        }
    return acc / count;
}

struct PsnrResult {
    double db = 0.0;
    bool infinite = false;
};

// Peak signal-to-noise ratio over the 8-bit domain: both images are quantized
// to 0..255 first, honoring the 255^2 peak in the definition.
inline PsnrResult psnr(const Image& f, const Image& g) {
    if (f.width != g.width || f.height != g.height)
        throw ShapeError("psnr: image sizes differ");
    double se = 0.0;
    for (int i = 0; i < f.count(); ++i) {
        double d = static_cast<double>(quantize8(f.pixels[i])) - quantize8(g.pixels[i]);
        se += d * d;
    }
    double mse = se / f.count();
    if (mse == 0.0) return {0.0, true};
    return {10.0 * std::log10(255.0 * 255.0 / mse), false};
}

struct PairScore {
    int x_week = 0;
    int y_week = 0;
    char side = 'L';
    double ssim = 0.0;
    double psnr_db = 0.0;
    bool psnr_infinite = false;
};

struct MetricReport {
    std::string label;
    std::vector<PairScore> rows;
    double ssim_mean = 0, ssim_std = 0;
    double psnr_mean = 0, psnr_std = 0;  // over finite rows only
    int psnr_excluded = 0;

    void finalize() {
        double s = 0, s2 = 0, p = 0, p2 = 0;
        int pn = 0;
        psnr_excluded = 0;
        for (const auto& r : rows) {
            s += r.ssim;
            s2 += r.ssim * r.ssim;
            if (r.psnr_infinite) {
                ++psnr_excluded;
            } else {
                p += r.psnr_db;
                p2 += r.psnr_db * r.psnr_db;
                ++pn;
            }
        }
        auto mean_std = [](double sum, double sumsq, int n, double& mean, double& sd) {
            if (n == 0) {
                mean = sd = 0;
                return;
            }
            mean = sum / n;
            double var = sumsq / n - mean * mean;
            sd = var > 0 ? std::sqrt(var) : 0.0;
        };
        mean_std(s, s2, static_cast<int>(rows.size()), ssim_mean, ssim_std);
        mean_std(p, p2, pn, psnr_mean, psnr_std);
    }
};

// Scores model predictions against ground truth for every sample.
inline MetricReport evaluate(const ModelParams<float>& params, const SampleSet& samples,
                             const std::string& label, int window = 8) {
    if (samples.size() == 0) throw DatasetError("evaluate: empty sample set");
    MetricReport rep;
    rep.label = label;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        check_delta_mode<float>(params.config, samples.delta(i));
        Image pred = predict(params, samples.X(i), samples.delta(i));
        const auto& rx = (*samples.records)[samples.samples[i].x];
        const auto& ry = (*samples.records)[samples.samples[i].y];
        PairScore sc;
        sc.x_week = rx.week;
        sc.y_week = ry.week;
        sc.side = side_char(rx.side);
        sc.ssim = ssim(pred, samples.Y(i), window);
        PsnrResult pr = psnr(pred, samples.Y(i));
        sc.psnr_db = pr.db;
        sc.psnr_infinite = pr.infinite;
        rep.rows.push_back(sc);
    }
    rep.finalize();
    return rep;
}

// The floor any temporal model must beat: the prediction is the input itself.
inline MetricReport persistence_report(const SampleSet& samples, const std::string& label,
                                       int window = 8) {
    if (samples.size() == 0) throw DatasetError("evaluate: empty sample set");
    MetricReport rep;
    rep.label = label;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& rx = (*samples.records)[samples.samples[i].x];
        const auto& ry = (*samples.records)[samples.samples[i].y];
        PairScore sc;
        sc.x_week = rx.week;
        sc.y_week = ry.week;
        sc.side = side_char(rx.side);
        sc.ssim = ssim(samples.X(i), samples.Y(i), window);
        PsnrResult pr = psnr(samples.X(i), samples.Y(i));
        sc.psnr_db = pr.db;
        sc.psnr_infinite = pr.infinite;
        rep.rows.push_back(sc);
    }
    rep.finalize();
    return rep;
}

inline void write_report_csv(const MetricReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "kind,label,side,x_week,y_week,ssim,psnr_db,psnr_infinite\n";
    f << std::setprecision(10);
    for (const auto& r : rep.rows)
        f << "pair," << rep.label << "," << r.side << "," << r.x_week << "," << r.y_week << ","
          << r.ssim << "," << r.psnr_db << "," << (r.psnr_infinite ? 1 : 0) << "\n";
    f << "mean," << rep.label << ",,,," << rep.ssim_mean << "," << rep.psnr_mean << ",\n";
    f << "std," << rep.label << ",,,," << rep.ssim_std << "," << rep.psnr_std << ",\n";
    if (!f) throw IoError("short write: " + path);
}

// Aligned text tables, one per metric, rows = model labels.
inline std::string format_report_tables(const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    std::size_t w = 10;
    for (const auto& r : reports) w = std::max(w, r.label.size() + 2);

    os << "SSIM\n";
    os << std::left << std::setw(static_cast<int>(w)) << "  Model" << std::right
       << std::setw(10) << "Mean" << std::setw(10) << "STD" << "\n";
    for (const auto& r : reports)
        os << "  " << std::left << std::setw(static_cast<int>(w) - 2) << r.label << std::right
           << std::setw(10) << r.ssim_mean << std::setw(10) << r.ssim_std << "\n";

    os << "\nPSNR (dB)\n";
    os << std::left << std::setw(static_cast<int>(w)) << "  Model" << std::right
       << std::setw(10) << "Mean" << std::setw(10) << "STD" << "\n";
    for (const auto& r : reports) {
        os << "  " << std::left << std::setw(static_cast<int>(w) - 2) << r.label << std::right
           << std::setw(10) << r.psnr_mean << std::setw(10) << r.psnr_std;
        if (r.psnr_excluded > 0)
            os << "  (" << r.psnr_excluded << " infinite, excluded)";
        os << "\n";
    }
    return os.str();
}

} // namespace solewear
