#include <doctest.h>

#include <numeric>
#include <random>

#include "tucomp/tensor.hpp"
#include "test_util.hpp"

using namespace tucomp;
using testutil::random_tensor;

namespace {

// Brute-force mode-k fiber enumeration: columns ordered lexicographically
// over the remaining indices, last fastest.
Matrix<double> matricize_oracle(const DenseTensor<double>& t, std::size_t mode) {
    const auto& shape = t.shape();
    const std::size_t d = shape.size();
    std::size_t cols = t.size() / shape[mode];
    Matrix<double> m(shape[mode], cols);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < shape[mode]; ++r) {
            idx[mode] = r;
            m(r, c) = t.at(idx);
        }
        for (std::size_t a = d; a-- > 0;) {
            if (a == mode) continue;
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return m;
}

DenseTensor<double> mode_product_oracle(const Matrix<double>& m, const DenseTensor<double>& t,
                                        std::size_t mode) {
    Shape out_shape = t.shape();
    out_shape[mode] = m.rows();
    DenseTensor<double> out(out_shape);
    std::vector<std::size_t> idx(t.order(), 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = out.order(); a-- > 0;) {
            idx[a] = rem % out_shape[a];
            rem /= out_shape[a];
        }
        double acc = 0;
        auto src = idx;
        for (std::size_t k = 0; k < t.extent(mode); ++k) {
            src[mode] = k;
            acc += m(idx[mode], k) * t.at(src);
        }
        out[flat] = acc;
    }
    return out;
}

}  // namespace

TEST_CASE("matricize of a matrix") {
    DenseTensor<double> t({2, 2}, {1, 2, 3, 4});
    auto m1 = matricize(t, 0);
    CHECK(m1(0, 0) == 1);
    CHECK(m1(0, 1) == 2);
    CHECK(m1(1, 0) == 3);
    CHECK(m1(1, 1) == 4);
    auto m2 = matricize(t, 1);
    CHECK(m2(0, 0) == 1);
    CHECK(m2(0, 1) == 3);
    CHECK(m2(1, 0) == 2);
    CHECK(m2(1, 1) == 4);
    CHECK_THROWS_AS(matricize(t, 2), Error);
}

TEST_CASE("matricize matches the fiber enumeration oracle") {
    DenseTensor<double> t({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    for (std::size_t k = 0; k < 3; ++k) {
        auto got = matricize(t, k);
        auto want = matricize_oracle(t, k);
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }
    auto r = random_tensor({3, 4, 2, 5}, 99);
    for (std::size_t k = 0; k < 4; ++k) {
        auto got = matricize(r, k);
        auto want = matricize_oracle(r, k);
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("mode-1 matricization is a pure reshape") {
    auto t = random_tensor({4, 3, 5}, 5);
    auto m = matricize(t, 0);
    for (std::size_t i = 0; i < t.size(); ++i)
        CHECK(m.data()[i] == t[i]);  // row-major matrix shares the flat order
}

TEST_CASE("mode_product identity and shape errors") {
    auto t = random_tensor({3, 4, 2}, 1);
    Matrix<double> id = Matrix<double>::Identity(4, 4);
    auto same = mode_product(id, t, 1);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(same[i] == t[i]);
    Matrix<double> bad = Matrix<double>::Identity(3, 3);
    CHECK_THROWS_AS(mode_product(bad, t, 1), Error);
}

TEST_CASE("mode_product norm preservation under an orthogonal matrix") {
    auto t = random_tensor({4, 4, 4}, 2);
    Matrix<double> m = Matrix<double>::Random(4, 4);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Matrix<double> orth = qr.householderQ();
    auto y = mode_product(orth, t, 2);
    CHECK(norm_sq(y) == doctest::Approx(norm_sq(t)).epsilon(1e-12));
}

TEST_CASE("mode_product matches the naive contraction oracle") {
    auto t = random_tensor({2, 2, 2}, 3);
    Matrix<double> m = Matrix<double>::Random(3, 2);
    for (std::size_t k = 0; k < 3; ++k) {
        auto got = mode_product(m, t, k);
        auto want = mode_product_oracle(m, t, k);
        CHECK(sse_between(got, want) < 1e-24);
    }
}

TEST_CASE("mode products compose and commute") {
    auto t = random_tensor({3, 4, 5}, 4);
    Matrix<double> a = Matrix<double>::Random(3, 3);
    Matrix<double> b = Matrix<double>::Random(3, 3);
    auto lhs = mode_product(Matrix<double>(a * b), t, 0);
    auto rhs = mode_product(a, mode_product(b, t, 0), 0);
    CHECK(sse_between(lhs, rhs) / norm_sq(lhs) < 1e-24);

    Matrix<double> c = Matrix<double>::Random(2, 5);
    auto ab = mode_product(c, mode_product(a, t, 0), 2);
    auto ba = mode_product(a, mode_product(c, t, 2), 0);
    CHECK(sse_between(ab, ba) / norm_sq(ab) < 1e-24);
}

TEST_CASE("transpose identity, matrix case, and roundtrip") {
    auto t = random_tensor({2, 3}, 6);
    auto same = transpose(t, {0, 1});
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(same[i] == t[i]);

    auto tt = transpose(t, {1, 0});
    CHECK(tt.shape() == Shape{3, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            std::size_t src[2] = {i, j}, dst[2] = {j, i};
            CHECK(tt.at(dst) == t.at(src));
        }

    auto r = random_tensor({2, 4, 3, 5}, 7);
    ModePermutation p = {2, 0, 3, 1};
    auto back = transpose(transpose(r, p), inverse_permutation(p));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(back[i] == r[i]);

    CHECK_THROWS_AS(transpose(r, ModePermutation{0, 0, 1, 2}), Error);
}

TEST_CASE("transpose element mapping oracle") {
    auto r = random_tensor({3, 4, 5}, 8);
    ModePermutation p = {2, 0, 1};
    auto out = transpose(r, p);
    REQUIRE(out.shape() == Shape{5, 3, 4});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k) {
                std::size_t dst[3] = {i, j, k};
                std::size_t src[3] = {j, k, i};  // source index at perm positions
                CHECK(out.at(dst) == r.at(src));
            }
}

TEST_CASE("sse_between") {
    DenseTensor<double> a({2}, {1, 2});
    DenseTensor<double> z({2}, {0, 0});
    CHECK(sse_between(a, a) == 0.0);
    CHECK(sse_between(a, z) == 5.0);
    DenseTensor<double> w({3}, {0, 0, 0});
    CHECK_THROWS_AS(sse_between(a, w), Error);

    auto x = random_tensor({11, 13}, 9);
    auto y = random_tensor({11, 13}, 10);
    long double ref = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const long double dd = static_cast<long double>(x[i]) - static_cast<long double>(y[i]);
        ref += dd * dd;
    }
    CHECK(sse_between(x, y) ==
          doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("reshape never moves data") {
    auto t = random_tensor({4, 6}, 11);
    std::vector<double> before(t.elements().begin(), t.elements().end());
    auto r = std::move(t).reshaped({2, 3, 4});
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(r[i] == before[i]);
    CHECK_THROWS_AS(std::move(r).reshaped({5, 5}), Error);
}
