#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace solewear {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Grayscale image, row-major, values in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int w, int h, float fill = 0.f)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0)
            throw ShapeError("image: non-positive size " + std::to_string(w) + "x" +
                             std::to_string(h));
    }

    float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    int count() const { return width * height; }

    template <typename T>
    Tensor<T> to_tensor() const {
        Tensor<T> t({1, height, width});
        for (int i = 0; i < count(); ++i) t[i] = static_cast<T>(pixels[i]);
        return t;
    }

    template <typename T>
    static Image from_tensor(const Tensor<T>& t) {
        require_rank(t, 3, "image");
        if (t.shape[0] != 1)
            throw ShapeError("image: expected a single channel, got shape " + shape_str(t.shape));
        Image img(t.shape[2], t.shape[1]);
        for (int i = 0; i < img.count(); ++i) img.pixels[i] = static_cast<float>(t[i]);
        return img;
    }
};

inline std::uint8_t quantize8(float v) {
    float c = std::min(1.f, std::max(0.f, v));
    return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

inline void write_pgm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) row[x] = quantize8(img.at(y, x));
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw IoError("short write: " + path);
}

namespace detail {
inline int pgm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines between header fields.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed header: " + path);
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}
} // namespace detail

inline Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM: " + path);
    int w = detail::pgm_token(f, path);
    int h = detail::pgm_token(f, path);
    int maxval = detail::pgm_token(f, path);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PGM geometry in " + path + " (need 8-bit)");
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    f.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError("truncated pixel data: " + path);
    Image img(w, h);
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.f;
    return img;
}

// Area-average downsample; target must divide the source exactly.
inline Image downsample(const Image& src, int w, int h) {
    if (w <= 0 || h <= 0 || src.width % w != 0 || src.height % h != 0)
        throw ShapeError("downsample: " + std::to_string(src.width) + "x" +
                         std::to_string(src.height) + " is not a multiple of " +
                         std::to_string(w) + "x" + std::to_string(h));
    int fx = src.width / w, fy = src.height / h;
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < fy; ++dy)
                for (int dx = 0; dx < fx; ++dx) acc += src.at(y * fy + dy, x * fx + dx);
            out.at(y, x) = static_cast<float>(acc / (fx * fy));
        }
    }
    return out;
}

} // namespace solewear
