#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"

namespace cpsc {

// Probability floor applied inside logarithms (KL divergence, cross-entropy).
inline constexpr double kEpsKl = 1e-12;

using FeatureVector = std::vector<double>;

/// Dense row-major matrix of doubles. Column vectors are rows x 1.
/// Summation in every kernel runs in fixed row-major order so that results
/// are bit-reproducible run to run.
struct Tensor2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2D() = default;
    Tensor2D(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}
    Tensor2D(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw DimensionError("Tensor2D: data length does not equal rows*cols");
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_finite(const Tensor2D& t, const std::string& what) {
    if (!t.all_finite()) throw NumericError(what + ": non-finite value");
}

inline void require_finite(const FeatureVector& v, const std::string& what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(what + ": non-finite value");
}

inline Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                             " vs " + std::to_string(b.rows) + ")");
    Tensor2D out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    return out;
}

// y = W x
inline FeatureVector matvec(const Tensor2D& w, const FeatureVector& x) {
    if (w.cols != x.size())
        throw DimensionError("matvec: " + std::to_string(w.cols) + " cols vs vector of " +
                             std::to_string(x.size()));
    FeatureVector y(w.rows, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
        double acc = 0.0;
        const double* row = w.data.data() + i * w.cols;
        for (std::size_t k = 0; k < w.cols; ++k) acc += row[k] * x[k];
        y[i] = acc;
    }
    return y;
}

// y = W^T g
inline FeatureVector matvec_t(const Tensor2D& w, const FeatureVector& g) {
    if (w.rows != g.size())
        throw DimensionError("matvec_t: " + std::to_string(w.rows) + " rows vs vector of " +
                             std::to_string(g.size()));
    FeatureVector y(w.cols, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double gi = g[i];
        const double* row = w.data.data() + i * w.cols;
        for (std::size_t k = 0; k < w.cols; ++k) y[k] += row[k] * gi;
    }
    return y;
}

// W += g x^T (outer-product accumulation used by backward passes)
inline void add_outer(Tensor2D& w, const FeatureVector& g, const FeatureVector& x) {
    if (w.rows != g.size() || w.cols != x.size())
        throw DimensionError("add_outer: shape mismatch");
    for (std::size_t i = 0; i < w.rows; ++i) {
        double* row = w.data.data() + i * w.cols;
        const double gi = g[i];
        for (std::size_t k = 0; k < w.cols; ++k) row[k] += gi * x[k];
    }
}

inline void axpy(double a, const FeatureVector& x, FeatureVector& y) {
    if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double dot(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double l2_norm(const FeatureVector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

inline FeatureVector relu(const FeatureVector& v) {
    FeatureVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    return out;
}

/// Numerically stabilized softmax (max-subtraction).
inline FeatureVector softmax(const FeatureVector& v) {
    if (v.empty()) throw DimensionError("softmax: empty vector");
    require_finite(v, "softmax input");
    const double mx = *std::max_element(v.begin(), v.end());
    FeatureVector out(v.size());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        z += out[i];
    }
    for (double& x : out) x /= z;
    return out;
}

/// KL(p || q) = sum_i p_i ln(p_i / q_i), with both arguments floored at
/// kEpsKl inside the logs. Zero entries of p contribute nothing.
inline double kl_div(const FeatureVector& p, const FeatureVector& q) {
    if (p.size() != q.size()) throw DimensionError("kl_div: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        const double lp = std::log(std::max(p[i], kEpsKl));
        const double lq = std::log(std::max(q[i], kEpsKl));
        acc += p[i] * (lp - lq);
    }
    return acc;
}

inline double cross_entropy(const FeatureVector& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range");
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], kEpsKl));
}

/// Index of the largest entry; ties resolve to the smallest index.
inline int argmax(const FeatureVector& v) {
    if (v.empty()) throw DimensionError("argmax: empty vector");
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

inline FeatureVector one_hot(std::size_t size, int label) {
    FeatureVector v(size, 0.0);
    v[static_cast<std::size_t>(label)] = 1.0;
    return v;
}

} // namespace cpsc
