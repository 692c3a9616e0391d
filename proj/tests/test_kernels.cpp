#include <doctest.h>

#include <random>
#include <vector>

#include "tucomp/kernels.hpp"

using namespace tucomp;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(gen);
    return v;
}

}  // namespace

TEST_CASE("active backend is avx2 on this host when supported") {
#if defined(__x86_64__)
    if (__builtin_cpu_supports("avx2")) CHECK(std::string(kernels::active_backend()) == "avx2");
#endif
}

TEST_CASE("max_abs matches the scalar reference bitwise") {
    for (std::size_t n : {0, 1, 3, 4, 7, 64, 1000, 4097}) {
        auto v = random_vec(n, 17 + n, 100.0);
        CHECK(kernels::max_abs(v.data(), n) == kernels::detail::max_abs_scalar(v.data(), n));
    }
    std::vector<float> f(1001);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<float> dist(-3.f, 3.f);
    for (auto& x : f) x = dist(gen);
    CHECK(kernels::max_abs(f.data(), f.size()) ==
          kernels::detail::max_abs_scalar(f.data(), f.size()));
}

TEST_CASE("all_finite agrees with the scalar reference") {
    auto v = random_vec(513, 3);
    CHECK(kernels::all_finite(v.data(), v.size()));
    v[257] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(kernels::all_finite(v.data(), v.size()));
    v[257] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(kernels::all_finite(v.data(), v.size()));
    v[257] = -1e300;
    CHECK(kernels::all_finite(v.data(), v.size()));

    std::vector<float> f(97, 1.f);
    CHECK(kernels::all_finite(f.data(), f.size()));
    f[96] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(kernels::all_finite(f.data(), f.size()));
}

TEST_CASE("sum reductions match the scalar reference within accumulation error") {
    for (std::size_t n : {1, 5, 8, 100, 10000}) {
        auto a = random_vec(n, 23 + n);
        auto b = random_vec(n, 29 + n);
        const double simd = kernels::sum_squared_diff(a.data(), b.data(), n);
        const double ref = kernels::detail::sum_squared_diff_scalar(a.data(), b.data(), n);
        CHECK(simd == doctest::Approx(ref).epsilon(1e-13));
        const double simd_sq = kernels::sum_squares(a.data(), n);
        const double ref_sq = kernels::detail::sum_squares_scalar(a.data(), n);
        CHECK(simd_sq == doctest::Approx(ref_sq).epsilon(1e-13));
    }
}
