#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace solewear {

using Shape = std::vector<int>;

class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ')';
    return os.str();
}

// Dense row-major tensor. Rank is dynamic; element type is the template
// parameter so the same code runs in float for training and double for
// verification.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(count(shape)), T(0));
    }

    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (static_cast<std::size_t>(count(shape)) != data.size())
            throw ShapeError("tensor: " + std::to_string(data.size()) +
                             " values do not fill shape " + shape_str(shape));
    }

    static long long count(const Shape& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str(s));
            n *= d;
        }
        return n;
    }

    int numel() const { return static_cast<int>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

    T& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const T& at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    T& at(int o, int c, int y, int x) {
        return data[((static_cast<std::size_t>(o) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    const T& at(int o, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(o) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what) {
    if (t.shape != expected)
        throw ShapeError(std::string(what) + ": expected shape " + shape_str(expected) +
                         ", got " + shape_str(t.shape));
}

template <typename T>
void require_rank(const Tensor<T>& t, int rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_str(t.shape));
}

} // namespace solewear
