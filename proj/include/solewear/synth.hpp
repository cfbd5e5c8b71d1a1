#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "denoise.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace solewear {

// Procedural outsole with a year of simulated erosion. Every raster is an
// exact function of (spec, week): per-pixel material height h0 and wear rate
// r are fixed at generation time and the remaining depth at week w is
// max(0, h0 - r*w). All randomness comes from integer coordinate hashes and
// smooth fields use polynomial kernels, so identical specs give identical
// bytes on any platform.
//
// Feature mechanics, all falling out of (h0, r) plus the contact render:
//   - block faces sit at height ~1 and wear at the local pressure rate;
//   - ridges between blocks start below the contact plane and surface as the
//     faces erode down to them, merging neighbouring blocks;
//   - dots are small raised bumps wearing slightly faster than their block,
//     so they flatten away at a per-dot vanish week;
//   - holes are recessed floors inside blocks that fill in visually once the
//     surrounding face has eroded close to them;
//   - the logo glyph stands in a groove cell at a height tuned to surface
//     around a chosen reveal week, invisible in a week-0 impression.

struct OutsoleSpec {
    std::uint64_t seed = 1;
    int height = 640;
    int width = 256;
    int block_count = 63;
    Side side = Side::Left;

    double dot_density = 1.0;     // expected dots per block scale
    double ridge_fraction = 0.35; // fraction of adjacent block pairs bridged
    double hole_fraction = 0.30;  // fraction of blocks carrying a hole
    double wear_scale = 1.0;

    // Pressure field peaks (wear per week at the peaks).
    double base_rate = 0.0015;
    double heel_rate = 0.0085;
    double toe_rate = 0.0055;
    double mid_rate = 0.0020;

    // Logo glyph anchor in normalized coordinates. The default parks it on
    // the heel, where wear is fast enough to surface the glyph well inside
    // the observation window.
    double logo_u = 0.52;
    double logo_v = 0.78;

    void validate() const {
        if (height < 64 || width < 32 || height % 32 != 0 || width % 32 != 0)
            throw ConfigError("outsole: canvas " + std::to_string(height) + "x" +
                              std::to_string(width) +
                              " must be at least 64x32 and divisible by 32");
        if (block_count < 1) throw ConfigError("outsole: block_count must be at least 1");
        if (dot_density < 0 || ridge_fraction < 0 || ridge_fraction > 1 || hole_fraction < 0 ||
            hole_fraction > 1 || wear_scale <= 0)
            throw ConfigError("outsole: feature densities out of range");
    }
};

struct DotFeature {
    int x = 0, y = 0, r = 1;
    double vanish_week = 0;  // bump fully worn at this week
    double face_h0 = 1.0, face_rate = 0.0;
    int block = -1;
};

struct FeatureRegistry {
    double pitch = 0;
    std::vector<DotFeature> dots;
    std::vector<std::size_t> logo_pixels;  // linear indices of glyph strokes
    std::vector<std::size_t> logo_ring;    // groove pixels surrounding the glyph
    // Designated merge pair: two block centers whose bridge is tuned to
    // surface well before the last week.
    int merge_ax = -1, merge_ay = -1, merge_bx = -1, merge_by = -1;
    double merge_reveal_week = 0;
};

struct WearState {
    OutsoleSpec spec;
    int week = 0;
    std::vector<float> base;   // h0
    std::vector<float> rate;   // wear per week
    std::vector<float> depth;  // material remaining at `week`
    FeatureRegistry features;

    std::size_t idx(int y, int x) const {
        return static_cast<std::size_t>(y) * spec.width + x;
    }
};

namespace synthdetail {

constexpr double kContactDepth = 0.15;  // height band that still prints
constexpr double kDroop = 0.05;         // how far the lift sags into gaps
constexpr double kBackground = 0.06;
constexpr double kSpan = 0.91;

// Smooth, platform-exact bump: quartic falloff with reach 2.5*sigma.
inline double bump(double d, double sigma) {
    double t = d / (2.5 * sigma);
    double q = 1.0 - t * t;
    return q > 0 ? q * q : 0.0;
}

struct Field {
    const OutsoleSpec& spec;
    std::uint64_t salt;

    double u(double x) const {
        double raw = (x + 0.5) / spec.width;
        return spec.side == Side::Right ? 1.0 - raw : raw;
    }
    double v(double y) const { return (y + 0.5) / spec.height; }

    bool inside(double uu, double vv) const {
        auto ell = [&](double cu, double cv, double ru, double rv) {
            double du = (uu - cu) / ru, dv = (vv - cv) / rv;
            return du * du + dv * dv <= 1.0;
        };
        return ell(0.47, 0.28, 0.42, 0.25) || ell(0.50, 0.55, 0.33, 0.17) ||
               ell(0.53, 0.80, 0.36, 0.16);
    }

    // Wear pressure in height units per week, before texture.
    double pressure(double uu, double vv) const {
        double p = spec.base_rate;
        p += spec.heel_rate * bump(std::sqrt((uu - 0.53) * (uu - 0.53) * 0.6 +
                                             (vv - 0.80) * (vv - 0.80)),
                                   0.14);
        p += spec.toe_rate * bump(std::sqrt((uu - 0.47) * (uu - 0.47) * 0.5 +
                                            (vv - 0.25) * (vv - 0.25)),
                                  0.17);
        p += spec.mid_rate * bump(std::sqrt((uu - 0.50) * (uu - 0.50) * 0.6 +
                                            (vv - 0.52) * (vv - 0.52)),
                                  0.12);
        return p * spec.wear_scale;
    }
};

struct Cell {
    int row = 0, col = 0;
    double cx = 0, cy = 0;  // pixel center
};

enum HashSalt : std::uint64_t {
    SALT_KEEP = 1,
    SALT_JITTER = 2,
    SALT_EXTENT = 3,
    SALT_TEX = 4,
    SALT_FACE = 5,
    SALT_RIDGE = 6,
    SALT_DOTS = 7,
    SALT_HOLE = 8,
    SALT_RATE_BLOCK = 9,
    SALT_LOGO = 10,
};

// 5x7 letter bitmaps for the glyph.
inline const std::uint8_t* glyph_letter(char c) {
    static const std::uint8_t G[7] = {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01110};
    static const std::uint8_t E[7] = {0b11111, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000, 0b11111};
    static const std::uint8_t L[7] = {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111};
    switch (c) {
        case 'G': return G;
        case 'E': return E;
        default: return L;
    }
}

// Separable running max over a (2r+1) square.
inline void max_filter(const std::vector<float>& in, std::vector<float>& out, int w, int h, int r) {
    std::vector<float> tmp(in.size());
    for (int y = 0; y < h; ++y) {
        const float* row = in.data() + static_cast<std::size_t>(y) * w;
        float* trow = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
            float m = row[x0];
            for (int xx = x0 + 1; xx <= x1; ++xx) m = std::max(m, row[xx]);
            trow[x] = m;
        }
    }
    out.resize(in.size());
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
            float m = tmp[static_cast<std::size_t>(y0) * w + x];
            for (int yy = y0 + 1; yy <= y1; ++yy)
                m = std::max(m, tmp[static_cast<std::size_t>(yy) * w + x]);
            out[static_cast<std::size_t>(y) * w + x] = m;
        }
    }
}

} // namespace synthdetail

inline WearState generate_outsole(const OutsoleSpec& spec) {
    using namespace synthdetail;
    spec.validate();

    WearState st;
    st.spec = spec;
    st.week = 0;
    const int W = spec.width, H = spec.height;
    st.base.assign(static_cast<std::size_t>(W) * H, 0.f);
    st.rate.assign(st.base.size(), 0.f);

    std::uint64_t salt = splitmix64(spec.seed ^ (spec.side == Side::Right
                                                     ? 0x9d2c5680cafebabeull
                                                     : 0x2545f4914f6cdd1dull));
    Field field{spec, salt};

    // Grid pitch: shrink until enough cells fall inside the footprint for the
    // requested block count plus the logo cell and its flanks.
    double pitch = std::sqrt(0.45 * W * H / (spec.block_count * 1.35 + 4));
    std::vector<Cell> cells;
    int logo_cell = -1, flank_a = -1, flank_b = -1;
    for (int attempt = 0;; ++attempt) {
        cells.clear();
        int rows = static_cast<int>(H / pitch) + 1;
        int cols = static_cast<int>(W / pitch) + 2;
        for (int row = 0; row < rows; ++row) {
            double stagger = (row % 2) ? pitch * 0.5 : 0.0;
            for (int col = 0; col < cols; ++col) {
                Cell c;
                c.row = row;
                c.col = col;
                c.cx = (col + 0.5) * pitch + stagger;
                c.cy = (row + 0.5) * pitch;
                if (c.cx >= W || c.cy >= H) continue;
                if (field.inside(field.u(c.cx), field.v(c.cy))) cells.push_back(c);
            }
        }

        // Logo cell: nearest to the anchor. Its vertical neighbours become
        // forced blocks so the glyph always has printing material beside it.
        logo_cell = flank_a = flank_b = -1;
        double best = 1e30;
        for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
            double du = field.u(cells[i].cx) - spec.logo_u;
            double dv = field.v(cells[i].cy) - spec.logo_v;
            double d = du * du + dv * dv;
            if (d < best) {
                best = d;
                logo_cell = i;
            }
        }
        if (logo_cell >= 0) {
            double bu = 1e30, bd = 1e30;
            for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
                if (i == logo_cell) continue;
                double dx = cells[i].cx - cells[logo_cell].cx;
                double dy = cells[i].cy - cells[logo_cell].cy;
                if (std::abs(dx) > pitch * 0.8 || std::abs(dy) > pitch * 1.3) continue;
                if (dy < 0 && dx * dx + dy * dy < bu) {
                    bu = dx * dx + dy * dy;
                    flank_a = i;
                }
                if (dy > 0 && dx * dx + dy * dy < bd) {
                    bd = dx * dx + dy * dy;
                    flank_b = i;
                }
            }
        }

        int usable = static_cast<int>(cells.size()) - (logo_cell >= 0 ? 1 : 0);
        if (usable >= spec.block_count && logo_cell >= 0 && flank_a >= 0 && flank_b >= 0) break;
        pitch *= 0.93;
        if (attempt > 60 || pitch < 2.5)
            throw ConfigError("outsole: cannot place " + std::to_string(spec.block_count) +
                              " blocks on a " + std::to_string(W) + "x" + std::to_string(H) +
                              " canvas");
    }
    st.features.pitch = pitch;

    // Keep exactly block_count cells: forced flanks first, then by hashed
    // priority.
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(cells.size()); ++i)
        if (i != logo_cell && i != flank_a && i != flank_b) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        std::uint64_t ha = hash_coords(salt, cells[a].row, cells[a].col, SALT_KEEP);
        std::uint64_t hb = hash_coords(salt, cells[b].row, cells[b].col, SALT_KEEP);
        if (ha != hb) return ha < hb;
        return a < b;
    });
    std::vector<int> kept{flank_a, flank_b};
    for (int i : order) {
        if (static_cast<int>(kept.size()) >= spec.block_count) break;
        kept.push_back(i);
    }
    if (static_cast<int>(kept.size()) > spec.block_count) kept.resize(spec.block_count);
    std::sort(kept.begin(), kept.end(), [&](int a, int b) {
        if (cells[a].row != cells[b].row) return cells[a].row < cells[b].row;
        return cells[a].col < cells[b].col;
    });

    struct Block {
        double cx, cy, hx, hy, cr;
        int cell;
    };
    std::vector<Block> blocks;
    std::vector<std::int32_t> block_id(st.base.size(), -1);
    std::vector<float> edge_mult(st.base.size(), 1.f);

    for (int b = 0; b < static_cast<int>(kept.size()); ++b) {
        const Cell& c = cells[kept[b]];
        Block blk;
        blk.cell = kept[b];
        // Extents plus jitter stay under half the pitch so neighboring lugs
        // always leave a groove between them.
        blk.cx = c.cx + (hash_unit(salt, c.row, c.col, SALT_JITTER) - 0.5) * 0.16 * pitch;
        blk.cy = c.cy + (hash_unit(salt, c.col, c.row, SALT_JITTER) - 0.5) * 0.16 * pitch;
        blk.hx = pitch * (0.30 + 0.10 * hash_unit(salt, c.row, c.col, SALT_EXTENT));
        blk.hy = pitch * (0.30 + 0.10 * hash_unit(salt, c.col, c.row, SALT_EXTENT));
        blk.cr = 0.3 * std::min(blk.hx, blk.hy);
        blocks.push_back(blk);

        int x0 = std::max(0, static_cast<int>(blk.cx - blk.hx - 1));
        int x1 = std::min(W - 1, static_cast<int>(blk.cx + blk.hx + 1));
        int y0 = std::max(0, static_cast<int>(blk.cy - blk.hy - 1));
        int y1 = std::min(H - 1, static_cast<int>(blk.cy + blk.hy + 1));
        double ex = blk.hx - blk.cr, ey = blk.hy - blk.cr;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = std::max(0.0, std::abs(x + 0.5 - blk.cx) - ex);
                double dy = std::max(0.0, std::abs(y + 0.5 - blk.cy) - ey);
                double sdf = std::sqrt(dx * dx + dy * dy) - blk.cr;
                if (sdf > 0) continue;
                std::size_t i = st.idx(y, x);
                st.base[i] = static_cast<float>(1.0 + (hash_unit(salt, x, y, SALT_FACE) - 0.5) * 0.02);
                block_id[i] = b;
                if (sdf > -0.18 * std::min(blk.hx, blk.hy)) edge_mult[i] = 1.35f;
            }
    }

    // Bridged ridges between geometrically adjacent kept blocks. One pair is
    // forced to carry a designated bridge. It must sit where wear is brisk
    // enough to level the blocks down to the bridge inside the year, yet not
    // so fast that the pair drops out of contact entirely while the slower
    // neighborhood still holds the lift plane up.
    int best_pair_a = -1, best_pair_b = -1;
    double best_pair_rate = -1;
    int fb_a = -1, fb_b = -1;
    double fb_rate = -1;
    struct Ridge {
        int a, b;
        double height;
    };
    std::vector<Ridge> ridges;
    for (int a = 0; a < static_cast<int>(blocks.size()); ++a)
        for (int b = a + 1; b < static_cast<int>(blocks.size()); ++b) {
            double dx = blocks[b].cx - blocks[a].cx, dy = blocks[b].cy - blocks[a].cy;
            double d = std::sqrt(dx * dx + dy * dy);
            if (d > 1.35 * pitch) continue;
            double mx = 0.5 * (blocks[a].cx + blocks[b].cx);
            double my = 0.5 * (blocks[a].cy + blocks[b].cy);
            double pr = field.pressure(field.u(mx), field.v(my));
            double gap = d - (std::abs(dx / d) * (blocks[a].hx + blocks[b].hx) +
                              std::abs(dy / d) * (blocks[a].hy + blocks[b].hy));
            if (pr > fb_rate) {
                fb_rate = pr;
                fb_a = a;
                fb_b = b;
            }
            if (gap >= std::max(2.0, 0.10 * pitch) && pr > best_pair_rate) {
                best_pair_rate = pr;
                best_pair_a = a;
                best_pair_b = b;
            }
            if (hash_unit(salt, cells[blocks[a].cell].row * 131 + cells[blocks[a].cell].col,
                          cells[blocks[b].cell].row * 131 + cells[blocks[b].cell].col,
                          SALT_RIDGE) < spec.ridge_fraction)
                ridges.push_back({a, b, 0.50 + 0.12 * hash_unit(salt, a, b, SALT_RIDGE)});
        }
    if (best_pair_a < 0) {
        best_pair_a = fb_a;
        best_pair_b = fb_b;
        best_pair_rate = fb_rate;
    }

    if (best_pair_a >= 0) {
        bool present = false;
        for (auto& r : ridges)
            if (r.a == best_pair_a && r.b == best_pair_b) present = true;
        if (!present) ridges.push_back({best_pair_a, best_pair_b, 0.0});
        // The pair erodes at 0.75 of the nominal rate (hard compound); the
        // bridge height is set so the faces level down to it around week 40.
        double h = std::clamp(1.0 - 30.0 * best_pair_rate, 0.45, 0.82);
        for (auto& r : ridges)
            if (r.a == best_pair_a && r.b == best_pair_b)
                r.height = h;
        st.features.merge_ax = static_cast<int>(blocks[best_pair_a].cx);
        st.features.merge_ay = static_cast<int>(blocks[best_pair_a].cy);
        st.features.merge_bx = static_cast<int>(blocks[best_pair_b].cx);
        st.features.merge_by = static_cast<int>(blocks[best_pair_b].cy);
        st.features.merge_reveal_week =
            best_pair_rate > 0 ? (1.0 - h) / (0.75 * best_pair_rate) : 0.0;
    }

    for (const Ridge& r : ridges) {
        const Block &A = blocks[r.a], &B = blocks[r.b];
        bool designated = r.a == best_pair_a && r.b == best_pair_b;
        double dx = B.cx - A.cx, dy = B.cy - A.cy;
        double len = std::sqrt(dx * dx + dy * dy);
        double ux = dx / len, uy = dy / len;
        double half_w = 0.14 * pitch;
        int x0 = std::max(0, static_cast<int>(std::min(A.cx, B.cx) - half_w - 1));
        int x1 = std::min(W - 1, static_cast<int>(std::max(A.cx, B.cx) + half_w + 1));
        int y0 = std::max(0, static_cast<int>(std::min(A.cy, B.cy) - half_w - 1));
        int y1 = std::min(H - 1, static_cast<int>(std::max(A.cy, B.cy) + half_w + 1));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5 - A.cx, py = y + 0.5 - A.cy;
                double t = px * ux + py * uy;
                if (t < 0 || t > len) continue;
                double off = std::abs(px * uy - py * ux);
                if (off > half_w) continue;
                std::size_t i = st.idx(y, x);
                if (st.base[i] < r.height) st.base[i] = static_cast<float>(r.height);
                // The designated bridge must stay level with the faces it
                // joins, so the faster-wearing face rim is suppressed along
                // its strip.
                if (designated) edge_mult[i] = 1.f;
            }
    }

    // Holes: one recessed disc in a hashed subset of blocks.
    double hole_r = 0.17 * pitch;
    if (hole_r >= 2.0) {
        for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
            if (b == best_pair_a || b == best_pair_b) continue;
            if (hash_unit(salt, b, 0, SALT_HOLE) >= spec.hole_fraction) continue;
            const Block& blk = blocks[b];
            double hx = blk.cx + (hash_unit(salt, b, 1, SALT_HOLE) - 0.5) * blk.hx;
            double hy = blk.cy + (hash_unit(salt, b, 2, SALT_HOLE) - 0.5) * blk.hy;
            double du = hash_unit(salt, b, 3, SALT_HOLE);
            double d0 = du < 0.4 ? 0.75 : (du < 0.7 ? 0.40 : 0.25);
            int x0 = std::max(0, static_cast<int>(hx - hole_r - 1));
            int x1 = std::min(W - 1, static_cast<int>(hx + hole_r + 1));
            int y0 = std::max(0, static_cast<int>(hy - hole_r - 1));
            int y1 = std::min(H - 1, static_cast<int>(hy + hole_r + 1));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    double dx = x + 0.5 - hx, dyy = y + 0.5 - hy;
                    if (dx * dx + dyy * dyy > hole_r * hole_r) continue;
                    std::size_t i = st.idx(y, x);
                    if (block_id[i] == b)
                        st.base[i] = std::max(0.f, st.base[i] - static_cast<float>(d0));
                }
        }
    }

    // Dots: raised bumps that wear flat at a per-dot week.
    int dot_r = std::max(1, static_cast<int>(std::lround(0.09 * pitch)));
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
        if (b == best_pair_a || b == best_pair_b) continue;
        const Block& blk = blocks[b];
        int n = static_cast<int>(spec.dot_density * 3.2 * hash_unit(salt, b, 0, SALT_DOTS));
        for (int d = 0; d < n; ++d) {
            int dx_try = 0;
            for (; dx_try < 4; ++dx_try) {
                double px = blk.cx + (hash_unit(salt, b * 8 + d, dx_try * 2, SALT_DOTS) - 0.5) *
                                         1.2 * (blk.hx - dot_r - 1);
                double py = blk.cy + (hash_unit(salt, b * 8 + d, dx_try * 2 + 1, SALT_DOTS) - 0.5) *
                                         1.2 * (blk.hy - dot_r - 1);
                int ix = static_cast<int>(px), iy = static_cast<int>(py);
                if (ix < dot_r || ix >= W - dot_r || iy < dot_r || iy >= H - dot_r) continue;
                if (block_id[st.idx(iy, ix)] != b || st.base[st.idx(iy, ix)] < 0.95f) continue;

                DotFeature dot;
                dot.x = ix;
                dot.y = iy;
                dot.r = dot_r;
                dot.block = b;
                dot.vanish_week = 10.0 + 60.0 * hash_unit(salt, b * 8 + d, 99, SALT_DOTS);
                dot.face_h0 = st.base[st.idx(iy, ix)];
                dot.face_rate = 0.0;  // filled in once the rate raster exists
                st.features.dots.push_back(dot);
                break;
            }
        }
    }

    // Logo glyph raised in the groove of the logo cell.
    {
        const Cell& lc = cells[logo_cell];
        double r_loc = field.pressure(field.u(lc.cx), field.v(lc.cy));
        double reveal = 20.0 + 8.0 * hash_unit(salt, lc.row, lc.col, SALT_LOGO);
        // The lift plane over the glyph tracks the slowest-wearing tall pixel
        // within the droop radius; texture draws and off-peak pressure put
        // that near 0.6 of the cell's nominal rate.
        double g_h = std::clamp(1.0 - 0.6 * r_loc * reveal - kDroop - kContactDepth, 0.45, 0.85);

        const char* text = pitch >= 24 ? "GEL" : "G";
        int letters = static_cast<int>(std::string(text).size());
        int gw = letters * 5 + (letters - 1);
        int scale = std::clamp(static_cast<int>(std::lround(pitch * 1.1)) / gw, 1, 4);
        int x0 = static_cast<int>(lc.cx) - gw * scale / 2;
        int y0 = static_cast<int>(lc.cy) - 7 * scale / 2;
        for (int li = 0; li < letters; ++li) {
            const std::uint8_t* bits = glyph_letter(text[li]);
            for (int ry = 0; ry < 7; ++ry)
                for (int rx = 0; rx < 5; ++rx) {
                    if (!(bits[ry] & (1 << (4 - rx)))) continue;
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx) {
                            int x = x0 + (li * 6 + rx) * scale + sx;
                            int y = y0 + ry * scale + sy;
                            if (x < 0 || x >= W || y < 0 || y >= H) continue;
                            std::size_t i = st.idx(y, x);
                            if (st.base[i] > 0.5f) continue;  // never carve into blocks
                            st.base[i] = static_cast<float>(g_h);
                            st.features.logo_pixels.push_back(i);
                        }
                }
        }
        // Contrast reference ring: nearby groove pixels.
        std::vector<std::uint8_t> is_glyph(st.base.size(), 0);
        for (auto i : st.features.logo_pixels) is_glyph[i] = 1;
        for (auto i : st.features.logo_pixels) {
            int y = static_cast<int>(i) / W, x = static_cast<int>(i) % W;
            for (int dy = -3; dy <= 3; ++dy)
                for (int dx = -3; dx <= 3; ++dx) {
                    int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    std::size_t ni = st.idx(ny, nx);
                    if (is_glyph[ni] || st.base[ni] > 0.2f) continue;
                    st.features.logo_ring.push_back(ni);
                    is_glyph[ni] = 1;  // dedupe
                }
        }
    }

    // Week-0 contact plane decides which pixels actually touch the lift; only
    // touching material wears at full rate.
    {
        int r1 = std::max(1, static_cast<int>(std::lround(0.14 * pitch)));
        int r2 = std::max(2, static_cast<int>(std::lround(1.3 * pitch)));
        std::vector<float> p1, p2;
        max_filter(st.base, p1, W, H, r1);
        max_filter(st.base, p2, W, H, r2);
        for (std::size_t i = 0; i < st.base.size(); ++i) {
            float plane = std::max(p1[i], p2[i] - static_cast<float>(kDroop));
            bool touching = st.base[i] >= plane - static_cast<float>(kContactDepth);
            double gate = touching ? 1.0 : 0.05;
            int x = static_cast<int>(i) % W, y = static_cast<int>(i) / W;
            double tex = 0.9 + 0.2 * hash_unit(salt, x, y, SALT_TEX);
            double blk_tex = 1.0;
            if (block_id[i] >= 0) {
                blk_tex = 0.9 + 0.2 * hash_unit(salt, block_id[i], 7, SALT_RATE_BLOCK);
                // The bridged pair is cast in a harder compound, so it
                // outlasts the surrounding lift plane instead of wearing
                // into a void.
                if (block_id[i] == best_pair_a || block_id[i] == best_pair_b) blk_tex *= 0.75;
            }
            st.rate[i] = static_cast<float>(field.pressure(field.u(x), field.v(y)) * tex *
                                            blk_tex * gate * edge_mult[i]);
        }
    }

    // Dot bumps go on top of the finished faces; their extra wear rate makes
    // the bump vanish exactly at the registered week.
    for (DotFeature& dot : st.features.dots) {
        dot.face_rate = st.rate[st.idx(dot.y, dot.x)];
        for (int dy = -dot.r; dy <= dot.r; ++dy)
            for (int dx = -dot.r; dx <= dot.r; ++dx) {
                if (dx * dx + dy * dy > dot.r * dot.r) continue;
                std::size_t i = st.idx(dot.y + dy, dot.x + dx);
                double b = 0.05 * (1.0 - 0.5 * (dx * dx + dy * dy) / (dot.r * dot.r + 1.0));
                st.base[i] += static_cast<float>(b);
                st.rate[i] += static_cast<float>(b / dot.vanish_week);
            }
    }

    st.depth = st.base;
    return st;
}

// Erosion is a pure function of the absolute week, so advancing in any number
// of steps lands on identical rasters.
inline WearState advance_wear(const WearState& st, int weeks) {
    if (weeks < 0 || weeks % 2 != 0)
        throw ConfigError("advance_wear: weeks must be even and non-negative, got " +
                          std::to_string(weeks));
    WearState out = st;
    out.week = st.week + weeks;
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        double d = static_cast<double>(st.base[i]) - static_cast<double>(st.rate[i]) * out.week;
        out.depth[i] = d > 0 ? static_cast<float>(d) : 0.f;
    }
    return out;
}

// Contact render: material within kContactDepth of the local lift plane
// prints, scaled by a tallness fade so eroded regions print lighter. Output
// is quantized to exactly 256 levels.
inline Image render_impression(const WearState& st) {
    using namespace synthdetail;
    const int W = st.spec.width, H = st.spec.height;
    int r1 = std::max(1, static_cast<int>(std::lround(0.14 * st.features.pitch)));
    int r2 = std::max(2, static_cast<int>(std::lround(1.3 * st.features.pitch)));
    std::vector<float> p1, p2;
    max_filter(st.depth, p1, W, H, r1);
    max_filter(st.depth, p2, W, H, r2);

    Image img(W, H);
    for (std::size_t i = 0; i < st.depth.size(); ++i) {
        double h = st.depth[i];
        double plane = std::max(static_cast<double>(p1[i]),
                                static_cast<double>(p2[i]) - kDroop);
        double contact = (h - (plane - kContactDepth)) / kContactDepth;
        contact = std::clamp(contact, 0.0, 1.0);
        double tall = std::clamp(h, 0.0, 1.0);
        double fade = tall * std::sqrt(tall);  // x^1.5 without pow()
        double v = kBackground + kSpan * contact * fade;
        img.pixels[i] = static_cast<float>(std::lround(v * 255.0) / 255.0);
    }
    return img;
}

// Mean rendered contrast between the glyph strokes and their groove
// surroundings; works on any image with the generator's geometry.
inline double logo_contrast(const Image& img, const FeatureRegistry& reg) {
    if (reg.logo_pixels.empty() || reg.logo_ring.empty()) return 0.0;
    double a = 0, b = 0;
    for (auto i : reg.logo_pixels) a += img.pixels[i];
    for (auto i : reg.logo_ring) b += img.pixels[i];
    return a / reg.logo_pixels.size() - b / reg.logo_ring.size();
}

// Dots still visible at the state's week: the bump must retain height and its
// block face must still print.
inline int count_visible_dots(const WearState& st) {
    int n = 0;
    for (const DotFeature& d : st.features.dots) {
        double bump_left = 1.0 - st.week / d.vanish_week;
        double face = d.face_h0 - d.face_rate * st.week;
        if (bump_left > 0.15 && face > 0.35) ++n;
    }
    return n;
}

struct NoiseSpec {
    double intensity = 1.0;  // scales stroke counts; 0 disables
    int fibres = 12;
    int blobs = 6;
    int rings = 4;
    // Debris pressed against the lifter blocks it completely, so its marks
    // saturate above anything worn rubber can print (the render tops out at
    // background + span = 0.97).
    double min_level = 0.98;
    double max_level = 1.00;
    // Debris registers only where it adds clear contact on top of printed
    // material: the covered pixel must lie on the print and sit at least
    // min_drop below the debris level.
    double min_drop = 0.45;
    double print_floor = 0.10;

    void validate() const {
        if (intensity < 0) throw ConfigError("noise: intensity cannot be negative");
        if (min_level < 0 || max_level > 1 || min_level > max_level)
            throw ConfigError("noise: levels must satisfy 0 <= min <= max <= 1");
        if (fibres < 0 || blobs < 0 || rings < 0)
            throw ConfigError("noise: counts cannot be negative");
        if (min_drop < 0) throw ConfigError("noise: min_drop cannot be negative");
        if (print_floor < 0 || print_floor >= 1)
            throw ConfigError("noise: print_floor must lie in [0, 1)");
    }
};

struct NoisyImage {
    Image image;
    BinaryMask truth;  // exactly the pixels the debris changed
};

// Additive debris: fibre strokes, blob debris, bubble rings. Each stamp
// lifts covered print pixels up to its own grey level, so only print pixels
// clearly below the debris change and the truth mask is exact.
inline NoisyImage add_noise(const Image& img, const NoiseSpec& spec, std::uint64_t seed) {
    spec.validate();
    NoisyImage out;
    out.image = img;
    out.truth = BinaryMask(img.width, img.height);

    Pcg32 rng(splitmix64(seed), 77);
    const int W = img.width, H = img.height;
    const float drop = static_cast<float>(spec.min_drop);
    const float floor = static_cast<float>(spec.print_floor);
    auto stamp = [&](int x, int y, float level) {
        if (x < 0 || x >= W || y < 0 || y >= H) return;
        float& v = out.image.at(y, x);
        if (v > floor && v + drop <= level) {
            v = level;
            out.truth.at(y, x) = 1;
        }
    };

    int fibres = static_cast<int>(std::lround(spec.fibres * spec.intensity));
    int blobs = static_cast<int>(std::lround(spec.blobs * spec.intensity));
    int rings = static_cast<int>(std::lround(spec.rings * spec.intensity));
    int thick = std::max(1, static_cast<int>(std::lround(W / 170.0)));

    for (int f = 0; f < fibres; ++f) {
        float level = static_cast<float>(rng.uniform(spec.min_level, spec.max_level));
        double x = rng.uniform(0.05, 0.95) * W;
        double y = rng.uniform(0.05, 0.95) * H;
        double dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1);
        double n = std::sqrt(dx * dx + dy * dy);
        if (n < 1e-9) {
            dx = 1;
            dy = 0;
            n = 1;
        }
        dx /= n;
        dy /= n;
        int steps = static_cast<int>((0.20 + 0.30 * rng.next_double()) * H);
        for (int s = 0; s < steps; ++s) {
            for (int ty = -thick + 1; ty < thick; ++ty)
                for (int tx = -thick + 1; tx < thick; ++tx)
                    stamp(static_cast<int>(x) + tx, static_cast<int>(y) + ty, level);
            // drift the heading with a perpendicular nudge
            double px = -dy, py = dx;
            double j = rng.uniform(-0.25, 0.25);
            dx += px * j;
            dy += py * j;
            double nn = std::sqrt(dx * dx + dy * dy);
            dx /= nn;
            dy /= nn;
            x += dx;
            y += dy;
        }
    }

    for (int b = 0; b < blobs; ++b) {
        float level = static_cast<float>(rng.uniform(spec.min_level, spec.max_level));
        double cx = rng.uniform(0.1, 0.9) * W;
        double cy = rng.uniform(0.1, 0.9) * H;
        double rx = (0.004 + 0.003 * rng.next_double()) * H;
        double ry = rx * rng.uniform(0.6, 1.0);
        for (int y = static_cast<int>(cy - ry); y <= static_cast<int>(cy + ry) + 1; ++y)
            for (int x = static_cast<int>(cx - rx); x <= static_cast<int>(cx + rx) + 1; ++x) {
                double du = (x + 0.5 - cx) / rx, dv = (y + 0.5 - cy) / ry;
                if (du * du + dv * dv <= 1.0) stamp(x, y, level);
            }
    }

    for (int r = 0; r < rings; ++r) {
        float level = static_cast<float>(rng.uniform(spec.min_level, spec.max_level));
        double cx = rng.uniform(0.1, 0.9) * W;
        double cy = rng.uniform(0.15, 0.85) * H;
        double rad = (0.020 + 0.025 * rng.next_double()) * H;
        double width = std::max(1.0, rad * 0.14);
        for (int y = static_cast<int>(cy - rad - width); y <= static_cast<int>(cy + rad + width) + 1; ++y)
            for (int x = static_cast<int>(cx - rad - width); x <= static_cast<int>(cx + rad + width) + 1; ++x) {
                double d = std::sqrt((x + 0.5 - cx) * (x + 0.5 - cx) +
                                     (y + 0.5 - cy) * (y + 0.5 - cy));
                if (std::abs(d - rad) <= width) stamp(x, y, level);
            }
    }
    return out;
}

struct EmitResult {
    std::string manifest;        // clean impressions
    std::string noisy_manifest;  // empty when noise is disabled
    int clean_files = 0;
    int noisy_files = 0;
};

inline std::vector<int> dataset_weeks() {
    std::vector<int> w;
    for (int week = 0; week <= 52; week += 2)
        if (week != 6) w.push_back(week);
    return w;
}

// Writes the fortnightly series for both sides: clean impressions plus, when
// noise is enabled, noisy counterparts and their truth masks. Two manifests
// come out; training normally consumes the denoised successor of the noisy
// one. Optional downsampling before writing.
inline EmitResult emit_dataset(const OutsoleSpec& base_spec, const std::string& out_dir,
                               const NoiseSpec* noise = nullptr, int out_width = 0,
                               int out_height = 0) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    EmitResult res;
    res.manifest = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream mf(res.manifest);
    if (!mf) throw IoError("cannot open for writing: " + res.manifest);
    std::ofstream nf;
    if (noise && noise->intensity > 0) {
        res.noisy_manifest = (fs::path(out_dir) / "manifest_noisy.jsonl").string();
        nf.open(res.noisy_manifest);
        if (!nf) throw IoError("cannot open for writing: " + res.noisy_manifest);
    }

    for (Side side : {Side::Left, Side::Right}) {
        OutsoleSpec spec = base_spec;
        spec.side = side;
        WearState w0 = generate_outsole(spec);
        for (int week : dataset_weeks()) {
            WearState sw = advance_wear(w0, week);
            Image img = render_impression(sw);
            if (out_width > 0 && out_height > 0) img = downsample(img, out_width, out_height);

            char name[64];
            std::snprintf(name, sizeof name, "week%02d_%c.pgm", week, side_char(side));
            write_pgm(img, (fs::path(out_dir) / name).string());
            append_manifest_line(mf, week, side, name, false);
            ++res.clean_files;

            if (noise && noise->intensity > 0) {
                std::uint64_t nseed =
                    splitmix64(base_spec.seed ^ (static_cast<std::uint64_t>(week) * 2654435761ull) ^
                               (side == Side::Right ? 0xb5297a4d3a2dull : 0));
                NoisyImage noisy = add_noise(img, *noise, nseed);
                char nname[64], mname[64];
                std::snprintf(nname, sizeof nname, "week%02d_%c_noisy.pgm", week, side_char(side));
                std::snprintf(mname, sizeof mname, "week%02d_%c_mask.pgm", week, side_char(side));
                write_pgm(noisy.image, (fs::path(out_dir) / nname).string());
                Image mask(img.width, img.height);
                for (std::size_t i = 0; i < mask.pixels.size(); ++i)
                    mask.pixels[i] = noisy.truth.v[i] ? 1.f : 0.f;
                write_pgm(mask, (fs::path(out_dir) / mname).string());
                append_manifest_line(nf, week, side, nname, false);
                ++res.noisy_files;
            }
        }
    }

    // Key-value record of the generation parameters.
    std::ofstream cfg(fs::path(out_dir) / "spec.cfg");
    cfg << "seed=" << base_spec.seed << "\nheight=" << base_spec.height
        << "\nwidth=" << base_spec.width << "\nblock_count=" << base_spec.block_count
        << "\ndot_density=" << base_spec.dot_density
        << "\nridge_fraction=" << base_spec.ridge_fraction
        << "\nhole_fraction=" << base_spec.hole_fraction
        << "\nwear_scale=" << base_spec.wear_scale << "\n";
    if (noise) cfg << "noise_intensity=" << noise->intensity << "\n";
    if (out_width > 0) cfg << "out_width=" << out_width << "\nout_height=" << out_height << "\n";
    return res;
}

} // namespace solewear
