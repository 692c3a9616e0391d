#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tucomp/core_codec.hpp"
#include "tucomp/entropy.hpp"
#include "tucomp/tensor.hpp"

namespace tucomp::factorcodec {

/// Number of coefficients actually stored for an n x r orthonormal factor:
/// the strictly-below-diagonal reflector entries.
std::size_t stored_coefficient_count(std::size_t n, std::size_t r);

template <class T>
struct Factorized {
    /// n x r, column j zero above row j, unit norm with the diagonal as the
    /// largest-magnitude component, kept positive.
    Matrix<T> reflectors;
    std::vector<std::int8_t> column_flips;  // sign adjustment folded into u
    Matrix<T> adjusted;                     // u * diag(column_flips)
};

/// Householder reflector extraction with per-column sign adjustment, so the
/// implicit triangular factor is the identity and needs no storage.
template <class T>
Factorized<T> factorize(const Matrix<T>& u, double orth_tol = 1e-8);

/// Product of the reflections applied to the first r identity columns.
/// Diagonal entries are rebuilt from the unit-norm constraint.
template <class T>
Matrix<T> reconstruct(const Matrix<T>& reflectors);

/// Per-column quantization weights alpha_j; the stored entries of reflector
/// column j are scaled by sqrt(2 alpha_j). The grid is constant along rows.
std::vector<double> alpha_weights(std::span<const double> slice_norms, std::size_t n);

template <class T>
struct EncodedFactor {
    std::vector<std::uint8_t> dead;  // per column, 1 = skipped
    int scale_exponent = 0;
    std::uint64_t coeff_count = 0;   // live reflector coefficients
    corecodec::EncodedCore stream;
    std::vector<std::int8_t> flips;  // per column, +1 for dead columns
    Matrix<T> decoded_factor;        // what the decoder will reconstruct
    double factor_term = 0.0;        // ||dU diag(slice_norms)||_F^2, live columns
};

struct FactorEncodeOptions {
    entropy::Coder coder = entropy::Coder::arithmetic;
    int workers = 1;
    bool simple_weights = false;  // scale by the slice norm instead of sqrt(2 alpha)
    int core_step_log2 = 0;       // log2 of the core's breakpoint quantization step
    double term_cap = 0.0;        // deepen planes while the measured term exceeds this
};

template <class T>
EncodedFactor<T> encode_factor(const Matrix<T>& u, std::span<const std::uint8_t> dead,
                               std::span<const double> slice_norms,
                               const FactorEncodeOptions& opts);

template <class T>
Matrix<T> decode_factor(std::size_t n, std::size_t r, std::span<const std::uint8_t> dead,
                        std::span<const double> slice_norms, bool simple_weights,
                        int scale_exponent, std::uint64_t coeff_count,
                        const corecodec::CoreMeta& meta,
                        const std::vector<std::vector<std::span<const std::uint8_t>>>& payloads,
                        int workers);

}  // namespace tucomp::factorcodec
