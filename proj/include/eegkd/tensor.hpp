#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "eegkd/errors.hpp"

namespace eegkd {

// Dense row-major tensor of doubles. Activations use NCHW order.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(size_t(count(shape)), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (int64_t(data.size()) != count(shape)) throw ArgumentError("tensor data/shape size mismatch");
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    int64_t numel() const { return int64_t(data.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    int ndim() const { return int(shape.size()); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    // 4-d accessors (n, c, h, w)
    double& at(int n, int c, int h, int w) {
        return data[size_t(((int64_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    const double& at(int n, int c, int h, int w) const {
        return data[size_t(((int64_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    // 2-d accessors (r, c)
    double& at(int r, int c) { return data[size_t(int64_t(r) * shape[1] + c)]; }
    const double& at(int r, int c) const { return data[size_t(int64_t(r) * shape[1] + c)]; }

    Tensor reshaped(std::vector<int> s) const {
        if (count(s) != numel()) throw ArgumentError("reshape element count mismatch");
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        if (o.data.size() != data.size()) throw ArgumentError("tensor += size mismatch");
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

} // namespace eegkd
