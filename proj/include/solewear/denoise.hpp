#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "image.hpp"

namespace solewear {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> v;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }

    int count() const {
        int n = 0;
        for (auto b : v) n += b;
        return n;
    }
    bool operator==(const BinaryMask& o) const {
        return width == o.width && height == o.height && v == o.v;
    }
};

// Foreground = pixels brighter than their local window mean minus offset.
// The window mean at borders uses edge replication, so it is always a full
// window average.
inline BinaryMask adaptive_threshold(const Image& img, int window, float offset) {
    if (window < 3 || window % 2 == 0)
        throw ShapeError("adaptive_threshold: window must be odd and at least 3, got " +
                         std::to_string(window));
    if (window > img.width || window > img.height)
        throw ShapeError("adaptive_threshold: window " + std::to_string(window) +
                         " exceeds image " + std::to_string(img.width) + "x" +
                         std::to_string(img.height));
    const int r = window / 2;
    const int pw = img.width + 2 * r, ph = img.height + 2 * r;

    // Integral image over the edge-replicated padding.
    std::vector<double> integ(static_cast<std::size_t>(pw + 1) * (ph + 1), 0.0);
    auto I = [&](int y, int x) -> double& {
        return integ[static_cast<std::size_t>(y) * (pw + 1) + x];
    };
    for (int y = 0; y < ph; ++y) {
        int sy = std::clamp(y - r, 0, img.height - 1);
        for (int x = 0; x < pw; ++x) {
            int sx = std::clamp(x - r, 0, img.width - 1);
            I(y + 1, x + 1) = img.at(sy, sx) + I(y, x + 1) + I(y + 1, x) - I(y, x);
        }
    }

    BinaryMask m(img.width, img.height);
    const double area = static_cast<double>(window) * window;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double sum = I(y + window, x + window) - I(y, x + window) - I(y + window, x) + I(y, x);
            double mean = sum / area;
            if (img.at(y, x) > mean - offset) m.at(y, x) = 1;
        }
    return m;
}

inline BinaryMask dilate(const BinaryMask& m, int radius) {
    if (radius < 1) throw ShapeError("dilate: radius must be at least 1");
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            int y0 = std::max(0, y - radius), y1 = std::min(m.height - 1, y + radius);
            int x0 = std::max(0, x - radius), x1 = std::min(m.width - 1, x + radius);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) out.at(yy, xx) = 1;
        }
    return out;
}

inline BinaryMask erode(const BinaryMask& m, int radius) {
    if (radius < 1) throw ShapeError("erode: radius must be at least 1");
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (int yy = y - radius; all && yy <= y + radius; ++yy)
                for (int xx = x - radius; xx <= x + radius; ++xx) {
                    if (yy < 0 || yy >= m.height || xx < 0 || xx >= m.width || !m.at(yy, xx)) {
                        all = false;
                        break;
                    }
                }
            if (all) out.at(y, x) = 1;
        }
    return out;
}

struct ComponentLabels {
    std::vector<std::int32_t> labels;  // 0 = background, components numbered from 1
    int count = 0;
    int width = 0, height = 0;

    std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// 8-connected components, numbered in first-encounter (row-major) order.
inline ComponentLabels label_components(const BinaryMask& m) {
    ComponentLabels cl;
    cl.width = m.width;
    cl.height = m.height;
    cl.labels.assign(m.v.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x) || cl.labels[static_cast<std::size_t>(y) * m.width + x]) continue;
            int label = ++cl.count;
            stack.push_back({y, x});
            cl.labels[static_cast<std::size_t>(y) * m.width + x] = label;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) continue;
                        std::size_t idx = static_cast<std::size_t>(ny) * m.width + nx;
                        if (m.v[idx] && !cl.labels[idx]) {
                            cl.labels[idx] = label;
                            stack.push_back({ny, nx});
                        }
                    }
            }
        }
    return cl;
}

// Removes 8-connected components smaller than min_area.
inline BinaryMask roi_filter(const BinaryMask& m, int min_area) {
    if (min_area < 1) throw ShapeError("roi_filter: min_area must be at least 1");
    ComponentLabels cl = label_components(m);
    std::vector<int> area(cl.count + 1, 0);
    for (auto l : cl.labels)
        if (l) ++area[l];
    BinaryMask out(m.width, m.height);
    for (std::size_t i = 0; i < m.v.size(); ++i)
        if (cl.labels[i] && area[cl.labels[i]] >= min_area) out.v[i] = 1;
    return out;
}

struct DenoiseParams {
    int threshold_window = 15;      // at reference scale
    float threshold_offset = 0.01f; // contrast below which an outlier is treated as tread detail
    int refine_passes = 2;          // re-estimate local medians with flagged pixels excluded
    int min_area = 1;               // at reference scale; debris fragments down to a pixel count
    int dilate_radius = 1;
    int avg_kernel = 5;             // at reference scale
    float repair_guard = 0.0f;      // flagged pixels this close to their donor mean stay put
    float block_threshold = 0.10f;  // brightness separating printed material from blank background
    float debris_floor = 0.975f;    // absolute brightness no printable tread can reach
    bool noise_darker = false;      // debris adds contact and brightens; flip for dark-debris data
    int reference_width = 640;
    int reference_height = 256;

    // Window and area parameters scale with resolution relative to the
    // reference canvas.
    DenoiseParams scaled_for(int width, int height) const {
        DenoiseParams p = *this;
        double ratio = static_cast<double>(width) * height /
                       (static_cast<double>(reference_width) * reference_height);
        double lin = std::sqrt(ratio);
        auto odd_at_least_3 = [](double v) {
            int i = std::max(3, static_cast<int>(std::lround(v)));
            return i % 2 == 0 ? i + 1 : i;
        };
        p.threshold_window = odd_at_least_3(threshold_window * lin);
        p.avg_kernel = odd_at_least_3(avg_kernel * lin);
        p.min_area = std::max(1, static_cast<int>(std::lround(min_area * ratio)));
        int max_window = std::min(width, height);
        if (max_window % 2 == 0) --max_window;
        p.threshold_window = std::min(p.threshold_window, max_window);
        return p;
    }
};

struct NoiseMap {
    BinaryMask noise;
    ComponentLabels blocks;
};

namespace detail {

// Per-pixel median of kept pixels in the window, the center pixel excluded
// so a pixel never vouches for itself. Windows are clipped at borders. cnt
// is 0 where the window holds no other kept pixel. Pixel values are a
// 256-level grid, so a sliding histogram gives the exact median.
inline void masked_window_median(const Image& img, const std::vector<std::uint8_t>& keep,
                                 int window, std::vector<float>& med, std::vector<int>& cnt) {
    const int W = img.width, H = img.height, r = window / 2;
    med.assign(static_cast<std::size_t>(W) * H, 0.f);
    cnt.assign(static_cast<std::size_t>(W) * H, 0);

    std::vector<float> level_of(256, 0.f);
    std::vector<int> bin_of(static_cast<std::size_t>(W) * H, -1);
    for (std::size_t i = 0; i < bin_of.size(); ++i) {
        int b = std::clamp(static_cast<int>(std::lround(img.pixels[i] * 255.f)), 0, 255);
        bin_of[i] = b;
        level_of[b] = img.pixels[i];
    }

    std::array<int, 256> hist{};
    int in_window = 0;
    auto add_col = [&](int x, int y0, int y1, int sign) {
        for (int y = y0; y <= y1; ++y) {
            std::size_t i = static_cast<std::size_t>(y) * W + x;
            if (keep[i]) {
                hist[bin_of[i]] += sign;
                in_window += sign;
            }
        }
    };

    for (int y = 0; y < H; ++y) {
        int y0 = std::max(0, y - r), y1 = std::min(H - 1, y + r);
        hist.fill(0);
        in_window = 0;
        for (int x = 0; x <= std::min(W - 1, r); ++x) add_col(x, y0, y1, +1);
        for (int x = 0; x < W; ++x) {
            if (x > 0) {
                if (x + r < W) add_col(x + r, y0, y1, +1);
                if (x - r - 1 >= 0) add_col(x - r - 1, y0, y1, -1);
            }
            std::size_t i = static_cast<std::size_t>(y) * W + x;
            int self = keep[i] ? 1 : 0;
            if (self) --hist[bin_of[i]];
            int total = in_window - self;
            cnt[i] = total;
            if (total > 0) {
                int target = (total - 1) / 2;
                int seen = 0;
                for (int b = 0; b < 256; ++b) {
                    seen += hist[b];
                    if (seen > target) {
                        med[i] = level_of[b];
                        break;
                    }
                }
            }
            if (self) ++hist[bin_of[i]];
        }
    }
}

}  // namespace detail

// Marks debris pixels and labels the block features they sit on. The print
// background is blank, so anything above the brightness floor is material:
// block faces, dots, surfacing ridges, or debris resting on them. A
// candidate must reach debris_floor, the brightness band only saturated
// debris occupies, and contrast against the local median of material in the
// debris polarity. The median resists debris crowding the window where a
// mean would drift toward it; where crowding wins anyway the median itself
// lands in the debris band and convicts its whole window. Flagged pixels are
// excluded from the next pass's median, and an extreme pixel left with no
// reference at all is flagged with the cluster that isolated it. Small
// surviving components are dropped (specks of that size are tread details)
// after dilation, so a dashed stroke whose fragments sit within bridging
// distance is kept as one feature while a lone speck is not.
inline NoiseMap build_noise_map(const Image& img, const DenoiseParams& raw_params) {
    DenoiseParams p = raw_params.scaled_for(img.width, img.height);

    BinaryMask material(img.width, img.height);
    for (int i = 0; i < img.count(); ++i)
        if (img.pixels[i] > p.block_threshold) material.v[i] = 1;

    NoiseMap nm;
    nm.blocks = label_components(material);

    BinaryMask cand(img.width, img.height);
    std::vector<std::uint8_t> keep = material.v;
    std::vector<float> med;
    std::vector<int> cnt;
    for (int pass = 0; pass < std::max(1, p.refine_passes); ++pass) {
        detail::masked_window_median(img, keep, p.threshold_window, med, cnt);
        bool grew = false;
        for (std::size_t i = 0; i < cand.v.size(); ++i) {
            if (!material.v[i] || cand.v[i]) continue;
            float v = p.noise_darker ? 1.f - img.pixels[i] : img.pixels[i];
            if (v < p.debris_floor) continue;
            float m = p.noise_darker ? 1.f - med[i] : med[i];
            bool hit;
            if (cnt[i] == 0)
                hit = pass > 0;  // nothing left to vouch against: isolated by a cluster
            else
                hit = v - m > p.threshold_offset || m >= p.debris_floor;
            if (hit) {
                cand.v[i] = 1;
                keep[i] = 0;
                grew = true;
            }
        }
        if (!grew) break;
    }

    BinaryMask noise = dilate(cand, p.dilate_radius);
    for (std::size_t i = 0; i < noise.v.size(); ++i) noise.v[i] &= material.v[i];
    noise = roi_filter(noise, p.min_area);
    nm.noise = std::move(noise);
    return nm;
}

struct DenoiseResult {
    Image image;
    int unrepaired_blocks = 0;
};

// Replaces each flagged pixel by the mean of clean pixels in its window,
// donors restricted to the same block label. Falls back to the nearest clean
// pixel of the block; a fully flagged block is left unchanged and counted.
// A pixel already within repair_guard of its donor mean is left as it is:
// the flag came from a neighbour, not from its own value.
inline DenoiseResult denoise(const Image& img, const NoiseMap& nm, int kernel,
                             float repair_guard = 0.f) {
    if (kernel < 3 || kernel % 2 == 0)
        throw ShapeError("denoise: kernel must be odd and at least 3, got " +
                         std::to_string(kernel));
    if (nm.noise.width != img.width || nm.noise.height != img.height)
        throw ShapeError("denoise: noise map size does not match image");

    DenoiseResult res;
    res.image = img;
    const int r = kernel / 2;

    std::vector<int> clean_per_label(nm.blocks.count + 1, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int l = nm.blocks.at(y, x);
            if (l && !nm.noise.at(y, x)) ++clean_per_label[l];
        }
    std::vector<std::uint8_t> block_reported(nm.blocks.count + 1, 0);

    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!nm.noise.at(y, x)) continue;
            int label = nm.blocks.at(y, x);
            if (label == 0) continue;  // noise is clipped to foreground, defensive only
            if (clean_per_label[label] == 0) {
                if (!block_reported[label]) {
                    block_reported[label] = 1;
                    ++res.unrepaired_blocks;
                }
                continue;
            }

            double acc = 0.0;
            int n = 0;
            int y0 = std::max(0, y - r), y1 = std::min(img.height - 1, y + r);
            int x0 = std::max(0, x - r), x1 = std::min(img.width - 1, x + r);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx)
                    if (nm.blocks.at(yy, xx) == label && !nm.noise.at(yy, xx)) {
                        acc += img.at(yy, xx);
                        ++n;
                    }
            if (n > 0) {
                float m = static_cast<float>(acc / n);
                if (std::abs(m - img.at(y, x)) > repair_guard) res.image.at(y, x) = m;
                continue;
            }

            // Nearest clean donor in the same block, searched in growing
            // square rings; ties resolve to the smallest squared distance,
            // then scan order.
            int best_d2 = -1;
            float best_v = 0.f;
            for (int radius = r + 1; radius < img.width + img.height; ++radius) {
                int by0 = std::max(0, y - radius), by1 = std::min(img.height - 1, y + radius);
                int bx0 = std::max(0, x - radius), bx1 = std::min(img.width - 1, x + radius);
                for (int yy = by0; yy <= by1; ++yy)
                    for (int xx = bx0; xx <= bx1; ++xx) {
                        if (std::max(std::abs(yy - y), std::abs(xx - x)) != radius) continue;
                        if (nm.blocks.at(yy, xx) != label || nm.noise.at(yy, xx)) continue;
                        int d2 = (yy - y) * (yy - y) + (xx - x) * (xx - x);
                        if (best_d2 < 0 || d2 < best_d2) {
                            best_d2 = d2;
                            best_v = img.at(yy, xx);
                        }
                    }
                if (best_d2 >= 0 && best_d2 <= radius * radius) break;
            }
            if (std::abs(best_v - img.at(y, x)) > repair_guard) res.image.at(y, x) = best_v;
        }
    return res;
}

struct PipelineResult {
    Image image;
    NoiseMap map;
    int unrepaired_blocks = 0;
};

inline PipelineResult denoise_pipeline(const Image& img, const DenoiseParams& params) {
    PipelineResult r;
    r.map = build_noise_map(img, params);
    DenoiseParams scaled = params.scaled_for(img.width, img.height);
    DenoiseResult d = denoise(img, r.map, scaled.avg_kernel, scaled.repair_guard);
    r.image = std::move(d.image);
    r.unrepaired_blocks = d.unrepaired_blocks;
    return r;
}

} // namespace solewear
