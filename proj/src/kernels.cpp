#include "tucomp/kernels.hpp"

#include <cmath>

namespace tucomp::kernels {

namespace detail {

template <class T>
static T max_abs_impl(const T* x, std::size_t n) {
    T m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        T a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

double max_abs_scalar(const double* x, std::size_t n) { return max_abs_impl(x, n); }
float max_abs_scalar(const float* x, std::size_t n) { return max_abs_impl(x, n); }

template <class T>
static bool all_finite_impl(const T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

bool all_finite_scalar(const double* x, std::size_t n) { return all_finite_impl(x, n); }
bool all_finite_scalar(const float* x, std::size_t n) { return all_finite_impl(x, n); }

template <class T>
static double sum_squared_diff_impl(const T* a, const T* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

double sum_squared_diff_scalar(const double* a, const double* b, std::size_t n) {
    return sum_squared_diff_impl(a, b, n);
}
double sum_squared_diff_scalar(const float* a, const float* b, std::size_t n) {
    return sum_squared_diff_impl(a, b, n);
}

template <class T>
static double sum_squares_impl(const T* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = static_cast<double>(x[i]);
        s += v * v;
    }
    return s;
}

double sum_squares_scalar(const double* x, std::size_t n) { return sum_squares_impl(x, n); }
double sum_squares_scalar(const float* x, std::size_t n) { return sum_squares_impl(x, n); }

}  // namespace detail

namespace {

struct Dispatch {
    double (*max_abs_d)(const double*, std::size_t);
    float (*max_abs_f)(const float*, std::size_t);
    bool (*all_finite_d)(const double*, std::size_t);
    bool (*all_finite_f)(const float*, std::size_t);
    double (*ssd_d)(const double*, const double*, std::size_t);
    double (*ssd_f)(const float*, const float*, std::size_t);
    double (*sq_d)(const double*, std::size_t);
    double (*sq_f)(const float*, std::size_t);
    const char* name;
};

Dispatch pick_backend() {
#if defined(__x86_64__) || defined(__i386__)
    if (__builtin_cpu_supports("avx2")) {
        return {detail::max_abs_avx2,         detail::max_abs_avx2,
                detail::all_finite_avx2,      detail::all_finite_avx2,
                detail::sum_squared_diff_avx2, detail::sum_squared_diff_avx2,
                detail::sum_squares_avx2,     detail::sum_squares_avx2,
                "avx2"};
    }
#endif
    return {detail::max_abs_scalar,         detail::max_abs_scalar,
            detail::all_finite_scalar,      detail::all_finite_scalar,
            detail::sum_squared_diff_scalar, detail::sum_squared_diff_scalar,
            detail::sum_squares_scalar,     detail::sum_squares_scalar,
            "scalar"};
}

const Dispatch& backend() {
    static const Dispatch d = pick_backend();
    return d;
}

}  // namespace

double max_abs(const double* x, std::size_t n) { return backend().max_abs_d(x, n); }
float max_abs(const float* x, std::size_t n) { return backend().max_abs_f(x, n); }
bool all_finite(const double* x, std::size_t n) { return backend().all_finite_d(x, n); }
bool all_finite(const float* x, std::size_t n) { return backend().all_finite_f(x, n); }
double sum_squared_diff(const double* a, const double* b, std::size_t n) {
    return backend().ssd_d(a, b, n);
}
double sum_squared_diff(const float* a, const float* b, std::size_t n) {
    return backend().ssd_f(a, b, n);
}
double sum_squares(const double* x, std::size_t n) { return backend().sq_d(x, n); }
double sum_squares(const float* x, std::size_t n) { return backend().sq_f(x, n); }

const char* active_backend() { return backend().name; }

}  // namespace tucomp::kernels
