#include "tucomp/sthosvd.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tucomp/kernels.hpp"

namespace tucomp::sthosvd {

RankChoice choose_truncation_rank(std::span<const double> squared_singular_values,
                                  double step_budget) {
    if (squared_singular_values.empty()) throw Error("rank choice: empty singular values");
    if (step_budget < 0) throw Error("rank choice: negative budget");
    std::size_t r = squared_singular_values.size();
    double discarded = 0.0;
    while (r > 0) {
        const double next = discarded + squared_singular_values[r - 1];
        if (next > step_budget) break;
        discarded = next;
        --r;
    }
    return {r, discarded};
}

ModePermutation compression_mode_order(const Shape& mode_sizes) {
    ModePermutation p = identity_permutation(mode_sizes.size());
    std::stable_sort(p.begin(), p.end(),
                     [&](std::size_t a, std::size_t b) { return mode_sizes[a] < mode_sizes[b]; });
    return p;
}

ModePermutation decompression_mode_order(const Shape& n, const std::vector<std::size_t>& r) {
    const std::size_t d = n.size();
    if (r.size() != d) throw Error("mode order: rank/size count mismatch");
    if (d > 8) throw Error("mode order: exhaustive search limited to order 8");

    using Cost = unsigned __int128;
    auto cost_of = [&](const ModePermutation& p) {
        Cost total = 0;
        for (std::size_t i = 0; i < d; ++i) {
            Cost term = 1;
            for (std::size_t j = 0; j <= i; ++j) term *= n[p[j]];
            for (std::size_t j = i; j < d; ++j) term *= r[p[j]];
            total += term;
        }
        return total;
    };

    ModePermutation perm = identity_permutation(d);
    ModePermutation best = perm;
    Cost best_cost = cost_of(perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const Cost c = cost_of(perm);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    }
    return best;
}

namespace {

template <class T>
using ColMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Left singular vectors and squared singular values, descending.
template <class T>
void left_svd(const Eigen::Map<const Matrix<T>>& m, SvdBackend backend,
              ColMatrix<T>& u, std::vector<double>& sigma_sq) {
    const auto rows = m.rows();
    const bool use_gram = backend == SvdBackend::gram ||
                          (backend == SvdBackend::automatic && rows <= m.cols());
    if (use_gram) {
        ColMatrix<T> gram(rows, rows);
        gram.template triangularView<Eigen::Lower>() = m * m.transpose();
        Eigen::SelfAdjointEigenSolver<ColMatrix<T>> es(gram);
        if (es.info() != Eigen::Success) throw Error("sthosvd: eigendecomposition failed");
        u.resize(rows, rows);
        sigma_sq.assign(static_cast<std::size_t>(rows), 0.0);
        // eigenvalues come back ascending
        for (Eigen::Index j = 0; j < rows; ++j) {
            const Eigen::Index src = rows - 1 - j;
            u.col(j) = es.eigenvectors().col(src);
            sigma_sq[static_cast<std::size_t>(j)] =
                std::max(0.0, static_cast<double>(es.eigenvalues()(src)));
        }
    } else {
        Eigen::BDCSVD<ColMatrix<T>> svd(m, Eigen::ComputeThinU);
        u = svd.matrixU();
        sigma_sq.resize(static_cast<std::size_t>(u.cols()));
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            const double s = static_cast<double>(svd.singularValues()(j));
            sigma_sq[static_cast<std::size_t>(j)] = s * s;
        }
    }
}

/// Flips columns so the largest-magnitude entry is nonnegative.
template <class T>
void fix_column_signs(ColMatrix<T>& u) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index imax = 0;
        u.col(j).cwiseAbs().maxCoeff(&imax);
        if (u(imax, j) < T(0)) u.col(j) = -u.col(j);
    }
}

}  // namespace

template <class T>
TuckerFactorization<T> compress(const DenseTensor<T>& a, double sthosvd_sse_target,
                                const CompressOptions& opts) {
    if (sthosvd_sse_target < 0) throw Error("sthosvd: negative SSE target");
    if (!kernels::all_finite(a.data(), a.size()))
        throw Error("sthosvd: input contains non-finite values");

    const std::size_t d = a.order();
    ModePermutation p = opts.order ? *opts.order : compression_mode_order(a.shape());
    if (p.size() != d || !is_permutation(p)) throw Error("sthosvd: invalid processing order");

    TuckerFactorization<T> f;
    f.processing_order = p;
    f.factors.resize(d);
    f.per_step_truncation_sse.assign(d, 0.0);

    std::vector<T> elems = transpose(a, p).take_elements();
    std::vector<std::size_t> cur_shape(d);
    for (std::size_t i = 0; i < d; ++i) cur_shape[i] = a.extent(p[i]);

    double remaining = sthosvd_sse_target;
    for (std::size_t step = 0; step < d; ++step) {
        const std::size_t rows = cur_shape[0];
        const std::size_t cols = elems.size() / rows;
        Eigen::Map<const Matrix<T>> bmat(elems.data(), rows, cols);

        ColMatrix<T> u;
        std::vector<double> sigma_sq;
        left_svd<T>(bmat, opts.backend, u, sigma_sq);

        const double step_budget = remaining / static_cast<double>(d - step);
        RankChoice choice = choose_truncation_rank(sigma_sq, step_budget);
        if (choice.rank == 0) {
            // a budget exceeding the whole mode's energy still keeps one basis vector
            choice.rank = 1;
            choice.discarded_sse -= sigma_sq[0];
        }
        remaining = std::max(0.0, remaining - choice.discarded_sse);
        f.per_step_truncation_sse[p[step]] = choice.discarded_sse;

        ColMatrix<T> u_r = u.leftCols(static_cast<Eigen::Index>(choice.rank));
        fix_column_signs(u_r);
        f.factors[p[step]] = u_r;

        // project while shifting the mode order: (cols x rank) row-major is the
        // core with this step's mode rotated to the back
        std::vector<T> next(cols * choice.rank);
        Eigen::Map<Matrix<T>> projected(next.data(), cols, choice.rank);
        projected.noalias() = bmat.transpose() * u_r;
        elems = std::move(next);

        cur_shape.erase(cur_shape.begin());
        cur_shape.push_back(choice.rank);
    }

    f.core = DenseTensor<T>(Shape(cur_shape.begin(), cur_shape.end()), std::move(elems));
    return f;
}

template <class T>
DenseTensor<T> reconstruct(const TuckerFactorization<T>& f) {
    const std::size_t d = f.processing_order.size();
    if (f.factors.size() != d || f.core.order() != d)
        throw Error("reconstruct: inconsistent factorization");

    Shape n(d);
    std::vector<std::size_t> r(d);
    for (std::size_t i = 0; i < d; ++i) {
        n[i] = static_cast<std::size_t>(f.factors[i].rows());
        r[i] = static_cast<std::size_t>(f.factors[i].cols());
    }
    for (std::size_t j = 0; j < d; ++j)
        if (f.core.extent(j) != r[f.processing_order[j]])
            throw Error("reconstruct: core shape does not match factor ranks");

    const ModePermutation q = decompression_mode_order(n, r);

    // reorder core axes from processing order to decompression order
    const ModePermutation inv_p = inverse_permutation(f.processing_order);
    ModePermutation axis_perm(d);
    for (std::size_t j = 0; j < d; ++j) axis_perm[j] = inv_p[q[j]];
    std::vector<T> elems = transpose(f.core, axis_perm).take_elements();

    std::vector<std::size_t> cur_shape(d);
    for (std::size_t j = 0; j < d; ++j) cur_shape[j] = r[q[j]];

    for (std::size_t step = 0; step < d; ++step) {
        const std::size_t mode = q[step];
        const std::size_t rows = cur_shape[0];
        const std::size_t cols = elems.size() / rows;
        Eigen::Map<const Matrix<T>> bmat(elems.data(), rows, cols);
        const Matrix<T>& u = f.factors[mode];

        std::vector<T> next(cols * n[mode]);
        Eigen::Map<Matrix<T>> expanded(next.data(), cols, n[mode]);
        expanded.noalias() = bmat.transpose() * u.transpose();
        elems = std::move(next);

        cur_shape.erase(cur_shape.begin());
        cur_shape.push_back(n[mode]);
    }

    DenseTensor<T> in_q_order(Shape(cur_shape.begin(), cur_shape.end()), std::move(elems));
    return transpose(in_q_order, inverse_permutation(q));
}

template TuckerFactorization<float> compress(const DenseTensor<float>&, double,
                                             const CompressOptions&);
template TuckerFactorization<double> compress(const DenseTensor<double>&, double,
                                              const CompressOptions&);
template DenseTensor<float> reconstruct(const TuckerFactorization<float>&);
template DenseTensor<double> reconstruct(const TuckerFactorization<double>&);

}  // namespace tucomp::sthosvd
