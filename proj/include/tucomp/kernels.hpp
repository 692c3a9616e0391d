#pragma once

#include <cstddef>

namespace tucomp::kernels {

// Data-parallel reductions used by the quantizer and the error metrics.
// Scalar reference implementations always exist; on x86 an AVX2 variant is
// selected at runtime when the CPU supports it. max_abs and all_finite are
// bitwise-equivalent across backends; the sum reductions may differ in the
// last bits because the accumulation tree differs.

double max_abs(const double* x, std::size_t n);
float max_abs(const float* x, std::size_t n);

bool all_finite(const double* x, std::size_t n);
bool all_finite(const float* x, std::size_t n);

/// Sum of (a[i] - b[i])^2, accumulated in double.
double sum_squared_diff(const double* a, const double* b, std::size_t n);
double sum_squared_diff(const float* a, const float* b, std::size_t n);

/// Sum of x[i]^2, accumulated in double.
double sum_squares(const double* x, std::size_t n);
double sum_squares(const float* x, std::size_t n);

/// Name of the backend picked at startup ("scalar" or "avx2").
const char* active_backend();

namespace detail {
// Scalar reference kernels, exposed for the equivalence tests.
double max_abs_scalar(const double* x, std::size_t n);
float max_abs_scalar(const float* x, std::size_t n);
bool all_finite_scalar(const double* x, std::size_t n);
bool all_finite_scalar(const float* x, std::size_t n);
double sum_squared_diff_scalar(const double* a, const double* b, std::size_t n);
double sum_squared_diff_scalar(const float* a, const float* b, std::size_t n);
double sum_squares_scalar(const double* x, std::size_t n);
double sum_squares_scalar(const float* x, std::size_t n);

// AVX2 variants; only callable when the CPU supports AVX2.
double max_abs_avx2(const double* x, std::size_t n);
float max_abs_avx2(const float* x, std::size_t n);
bool all_finite_avx2(const double* x, std::size_t n);
bool all_finite_avx2(const float* x, std::size_t n);
double sum_squared_diff_avx2(const double* a, const double* b, std::size_t n);
double sum_squared_diff_avx2(const float* a, const float* b, std::size_t n);
double sum_squares_avx2(const double* x, std::size_t n);
double sum_squares_avx2(const float* x, std::size_t n);
}  // namespace detail

}  // namespace tucomp::kernels
