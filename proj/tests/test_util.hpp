#pragma once

// Shared helpers for the test suites: deterministic random tensors, the
// synthetic corpus, and small reference oracles.

#include <cmath>
#include <random>
#include <vector>

#include "tucomp/tensor.hpp"

namespace testutil {

using tucomp::DenseTensor;
using tucomp::Shape;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline DenseTensor<double> random_tensor(const Shape& shape, std::uint64_t seed,
                                         double lo = -1.0, double hi = 1.0) {
    auto gen = rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    DenseTensor<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(gen);
    return t;
}

/// Smooth separable field: products of sinusoids per mode.
inline DenseTensor<double> smooth_tensor(const Shape& shape, std::uint64_t seed = 7) {
    auto gen = rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 6.28);
    std::vector<std::vector<double>> waves;
    for (std::size_t a = 0; a < shape.size(); ++a) {
        const double p1 = phase(gen), p2 = phase(gen);
        std::vector<double> w(shape[a]);
        for (std::size_t i = 0; i < shape[a]; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(shape[a]);
            w[i] = std::sin(3.1 * x + p1) + 0.4 * std::cos(9.7 * x + p2);
        }
        waves.push_back(std::move(w));
    }
    DenseTensor<double> t(shape);
    const auto strides = tucomp::row_major_strides(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v = 1.0;
        for (std::size_t a = 0; a < shape.size(); ++a)
            v *= waves[a][(i / strides[a]) % shape[a]];
        t[i] = v;
    }
    return t;
}

/// Sum of a few rank-1 terms plus small dense noise.
inline DenseTensor<double> lowrank_noise_tensor(const Shape& shape, std::size_t rank,
                                                double noise, std::uint64_t seed = 11) {
    auto gen = rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    DenseTensor<double> t(shape);
    const auto strides = tucomp::row_major_strides(shape);
    for (std::size_t term = 0; term < rank; ++term) {
        std::vector<std::vector<double>> vecs;
        for (std::size_t a = 0; a < shape.size(); ++a) {
            std::vector<double> v(shape[a]);
            for (auto& x : v) x = dist(gen);
            vecs.push_back(std::move(v));
        }
        const double weight = 1.0 / static_cast<double>(1 + term * term);
        for (std::size_t i = 0; i < t.size(); ++i) {
            double v = weight;
            for (std::size_t a = 0; a < shape.size(); ++a)
                v *= vecs[a][(i / strides[a]) % shape[a]];
            t[i] += v;
        }
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += noise * dist(gen);
    return t;
}

/// Axis-aligned constant blocks.
inline DenseTensor<double> piecewise_tensor(const Shape& shape, std::size_t cells,
                                            std::uint64_t seed = 13) {
    auto gen = rng(seed);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<double> levels(cells * cells * cells + 7);
    for (auto& l : levels) l = dist(gen);
    DenseTensor<double> t(shape);
    const auto strides = tucomp::row_major_strides(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::size_t key = 0;
        for (std::size_t a = 0; a < shape.size(); ++a) {
            const std::size_t idx = (i / strides[a]) % shape[a];
            key = key * cells + idx * cells / shape[a];
        }
        t[i] = levels[key % levels.size()];
    }
    return t;
}

inline double relative_error(const DenseTensor<double>& a, const DenseTensor<double>& b) {
    return std::sqrt(tucomp::sse_between(a, b) / tucomp::norm_sq(a));
}

}  // namespace testutil
