#pragma once

#include <optional>
#include <vector>

#include "tucomp/tensor.hpp"

namespace tucomp::sthosvd {

/// Truncated Tucker factorization. The core is stored with its modes in
/// processing order; factors are indexed by original mode.
template <class T>
struct TuckerFactorization {
    DenseTensor<T> core;
    std::vector<Matrix<T>> factors;               // factors[i]: n_i x r_i
    ModePermutation processing_order;             // p: step j handles mode p[j]
    std::vector<double> per_step_truncation_sse;  // indexed by original mode

    std::vector<std::size_t> ranks() const {
        std::vector<std::size_t> r(factors.size());
        for (std::size_t i = 0; i < factors.size(); ++i)
            r[i] = static_cast<std::size_t>(factors[i].cols());
        return r;
    }

    double truncation_sse() const {
        double s = 0;
        for (double v : per_step_truncation_sse) s += v;
        return s;
    }
};

struct RankChoice {
    std::size_t rank;
    double discarded_sse;
};

/// Smallest rank whose discarded trailing squared singular values still fit
/// in the step budget. Values must be sorted descending.
RankChoice choose_truncation_rank(std::span<const double> squared_singular_values,
                                  double step_budget);

/// Compression order heuristic: modes by increasing length, ties by index.
ModePermutation compression_mode_order(const Shape& mode_sizes);

/// Decompression order minimizing sum_i n_{p_1}..n_{p_i} r_{p_i}..r_{p_d},
/// found by exhaustive search; ties break to the lexicographically smallest
/// permutation.
ModePermutation decompression_mode_order(const Shape& n, const std::vector<std::size_t>& r);

enum class SvdBackend {
    automatic,  // Gram eigendecomposition when rows <= cols, else direct SVD
    gram,
    direct,
};

struct CompressOptions {
    std::optional<ModePermutation> order;  // overrides the heuristic
    SvdBackend backend = SvdBackend::automatic;
};

/// One initial transposition, then per mode: reshape, SVD, rank choice, and a
/// projection fused with a transpose so the core's mode order shifts
/// circularly. The per-step budget is the remaining budget divided by the
/// number of remaining modes; unused budget rolls forward.
template <class T>
TuckerFactorization<T> compress(const DenseTensor<T>& a, double sthosvd_sse_target,
                                const CompressOptions& opts = {});

/// Inverse of compress: applies the factors along the decompression order
/// with the mirrored circular shift, then restores the natural mode order
/// with one final transposition.
template <class T>
DenseTensor<T> reconstruct(const TuckerFactorization<T>& f);

}  // namespace tucomp::sthosvd
