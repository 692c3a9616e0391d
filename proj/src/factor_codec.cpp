#include "tucomp/factor_codec.hpp"

#include <cmath>

namespace tucomp::factorcodec {

namespace {

template <class T>
using ColMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline double sgn_nonneg(double v) { return v < 0 ? -1.0 : 1.0; }

}  // namespace

std::size_t stored_coefficient_count(std::size_t n, std::size_t r) {
    return n * r - r * (r + 1) / 2;
}

template <class T>
Factorized<T> factorize(const Matrix<T>& u, double orth_tol) {
    const Eigen::Index n = u.rows();
    const Eigen::Index r = u.cols();
    if (r > n) throw Error("factorize: more columns than rows");
    if (r > 0) {
        const double dev = (u.transpose() * u - ColMatrix<T>::Identity(r, r))
                               .template lpNorm<Eigen::Infinity>();
        if (dev > orth_tol) throw Error("factorize: input columns are not orthonormal");
    }

    Factorized<T> f;
    f.reflectors = Matrix<T>::Zero(n, r);
    f.column_flips.assign(static_cast<std::size_t>(r), 1);
    f.adjusted = u;

    ColMatrix<T> rmat = u;
    for (Eigen::Index i = 0; i < r; ++i) {
        Vector<T> v = rmat.col(i).tail(n - i);
        const T norm = v.norm();
        v(0) += static_cast<T>(sgn_nonneg(static_cast<double>(v(0)))) * norm;
        const T vnorm = v.norm();
        if (vnorm == T(0)) throw Error("factorize: degenerate reflector");
        v /= vnorm;
        rmat.bottomRightCorner(n - i, r - i).noalias() -=
            T(2) * v * (v.transpose() * rmat.bottomRightCorner(n - i, r - i));
        if (v(0) < T(0)) v = -v;  // same reflection, canonical positive diagonal
        f.reflectors.col(i).tail(n - i) = v;
        if (rmat(i, i) < T(0)) {
            f.column_flips[static_cast<std::size_t>(i)] = -1;
            f.adjusted.col(i) = -f.adjusted.col(i);
        }
    }
    return f;
}

template <class T>
Matrix<T> reconstruct(const Matrix<T>& reflectors) {
    const Eigen::Index n = reflectors.rows();
    const Eigen::Index r = reflectors.cols();
    ColMatrix<T> v = reflectors;
    for (Eigen::Index j = 0; j < r; ++j) {
        const T below_sq = v.col(j).tail(n - j - 1).squaredNorm();
        if (static_cast<double>(below_sq) >= 1.0)
            throw Error("reconstruct: reflector sub-diagonal norm reaches 1");
        v(j, j) = std::sqrt(T(1) - below_sq);
    }
    ColMatrix<T> x = ColMatrix<T>::Identity(n, r);
    for (Eigen::Index j = r; j-- > 0;) {
        const auto vj = v.col(j).tail(n - j);
        auto rows = x.bottomRows(n - j);
        rows.noalias() -= T(2) * vj * (vj.transpose() * rows);
    }
    return x;
}

std::vector<double> alpha_weights(std::span<const double> slice_norms, std::size_t n) {
    const std::size_t r = slice_norms.size();
    if (n < r) throw Error("weights: factor has more columns than rows");
    std::vector<double> alpha(r);
    double trailing = 0.0;
    for (std::size_t k = 0; k < r; ++k) trailing += slice_norms[k] * slice_norms[k];
    for (std::size_t j = 0; j < r; ++j) {
        const double sj = slice_norms[j];
        trailing -= sj * sj;  // now the sum over columns after j
        const double nj = static_cast<double>(n - j);
        const double snj = std::sqrt(nj);
        const double own = 1.0 + (nj + 5.0 * snj + 2.0) / ((snj + 1.0) * (snj + 1.0) * snj);
        alpha[j] = own * sj * sj;
        if (trailing > 0.0) {
            const double tail_coeff = 2.0 / (nj - 1.0) +
                                      (nj + 2.0 * snj + 2.0) /
                                          ((snj + 1.0) * (snj + 1.0) * (snj + 1.0) * snj);
            alpha[j] += tail_coeff * trailing;
        }
    }
    return alpha;
}

namespace {

std::vector<double> column_scales(std::span<const double> slice_norms, std::size_t n,
                                  bool simple) {
    const std::size_t r = slice_norms.size();
    std::vector<double> w(r);
    if (simple) {
        for (std::size_t j = 0; j < r; ++j) w[j] = slice_norms[j];
    } else {
        const auto alpha = alpha_weights(slice_norms, n);
        for (std::size_t j = 0; j < r; ++j) w[j] = std::sqrt(2.0 * alpha[j]);
    }
    return w;
}

/// Rebuilds the live factor from a decoded coefficient stream and expands it
/// with zero columns at the dead positions.
template <class T>
Matrix<T> assemble_factor(std::size_t n, std::size_t r, std::span<const std::uint8_t> dead,
                          std::span<const double> scales,
                          std::span<const std::uint64_t> magnitudes,
                          std::span<const std::uint8_t> signs, int scale_exponent) {
    std::vector<std::size_t> live;
    for (std::size_t j = 0; j < r; ++j)
        if (!dead[j]) live.push_back(j);
    const std::size_t r_live = live.size();

    Matrix<T> reflectors = Matrix<T>::Zero(n, static_cast<Eigen::Index>(r_live));
    std::size_t s = 0;
    for (std::size_t j = 0; j < r_live; ++j) {
        for (std::size_t i = j + 1; i < n; ++i, ++s) {
            double value = std::ldexp(static_cast<double>(magnitudes[s]), -scale_exponent);
            if (signs[s]) value = -value;
            reflectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<T>(value / scales[j]);
        }
    }
    if (s != magnitudes.size()) throw Error("factor decode: stream length mismatch");

    Matrix<T> full = Matrix<T>::Zero(n, static_cast<Eigen::Index>(r));
    if (r_live > 0) {
        Matrix<T> live_factor = reconstruct<T>(reflectors);
        for (std::size_t j = 0; j < r_live; ++j)
            full.col(static_cast<Eigen::Index>(live[j])) =
                live_factor.col(static_cast<Eigen::Index>(j));
    }
    return full;
}

}  // namespace

template <class T>
EncodedFactor<T> encode_factor(const Matrix<T>& u, std::span<const std::uint8_t> dead,
                               std::span<const double> slice_norms,
                               const FactorEncodeOptions& opts) {
    const std::size_t n = static_cast<std::size_t>(u.rows());
    const std::size_t r = static_cast<std::size_t>(u.cols());
    if (dead.size() != r || slice_norms.size() != r)
        throw Error("factor encode: column metadata mismatch");

    EncodedFactor<T> out;
    out.dead.assign(dead.begin(), dead.end());
    out.flips.assign(r, 1);

    std::vector<std::size_t> live;
    std::vector<double> live_norms;
    for (std::size_t j = 0; j < r; ++j) {
        if (!dead[j]) {
            live.push_back(j);
            live_norms.push_back(slice_norms[j]);
        }
    }
    const std::size_t r_live = live.size();
    if (r_live == 0) {
        out.decoded_factor = Matrix<T>::Zero(u.rows(), u.cols());
        return out;
    }

    Matrix<T> u_live(u.rows(), static_cast<Eigen::Index>(r_live));
    for (std::size_t j = 0; j < r_live; ++j)
        u_live.col(static_cast<Eigen::Index>(j)) = u.col(static_cast<Eigen::Index>(live[j]));

    Factorized<T> h = factorize(u_live);
    for (std::size_t j = 0; j < r_live; ++j) out.flips[live[j]] = h.column_flips[j];

    const auto scales = column_scales(live_norms, n, opts.simple_weights);
    out.coeff_count = stored_coefficient_count(n, r_live);
    std::vector<double> stream;
    stream.reserve(out.coeff_count);
    for (std::size_t j = 0; j < r_live; ++j)
        for (std::size_t i = j + 1; i < n; ++i)
            stream.push_back(static_cast<double>(h.reflectors(static_cast<Eigen::Index>(i),
                                                              static_cast<Eigen::Index>(j))) *
                             scales[j]);

    // quantize the weighted stream with its own scale
    const double max = stream.empty() ? 0.0 : kernels::max_abs(stream.data(), stream.size());
    out.scale_exponent = max > 0.0 ? 63 - std::ilogb(max) : 0;
    std::vector<std::uint64_t> magnitudes(stream.size());
    std::vector<std::uint8_t> signs(stream.size());
    for (std::size_t s = 0; s < stream.size(); ++s) {
        const double scaled = std::ldexp(std::fabs(stream[s]), out.scale_exponent);
        magnitudes[s] = static_cast<std::uint64_t>(std::nearbyint(scaled));
        signs[s] = stream[s] < 0 ? 1 : 0;
    }

    // match the core's final quantization step, then deepen while the factor
    // term stays above its share of the error budget
    int plane = std::clamp(opts.core_step_log2 + out.scale_exponent, 0, 63);
    auto adjusted_full = [&]() {
        Matrix<T> m = Matrix<T>::Zero(u.rows(), u.cols());
        for (std::size_t j = 0; j < r_live; ++j)
            m.col(static_cast<Eigen::Index>(live[j])) = h.adjusted.col(static_cast<Eigen::Index>(j));
        return m;
    }();

    while (true) {
        corecodec::EncodeOptions eopts;
        eopts.coder = opts.coder;
        eopts.workers = opts.workers;
        eopts.split_planes = false;
        eopts.fixed_last_plane = plane;
        corecodec::Encoder enc(magnitudes, eopts);
        enc.plan(0.0);

        out.decoded_factor = assemble_factor<T>(n, r, dead, scales, enc.decoded_magnitudes(),
                                                signs, out.scale_exponent);
        out.factor_term = 0.0;
        for (std::size_t j = 0; j < r_live; ++j) {
            const auto d = out.decoded_factor.col(static_cast<Eigen::Index>(live[j])) -
                           adjusted_full.col(static_cast<Eigen::Index>(live[j]));
            out.factor_term += live_norms[j] * live_norms[j] *
                               static_cast<double>(d.squaredNorm());
        }
        if (out.factor_term <= opts.term_cap || plane == 0) {
            out.stream = enc.finalize(signs);
            return out;
        }
        const double excess = out.factor_term / std::max(opts.term_cap, 1e-300);
        const int step = std::max(1, static_cast<int>(std::ceil(0.25 * std::log2(excess))));
        plane = std::max(0, plane - step);
    }
}

template <class T>
Matrix<T> decode_factor(std::size_t n, std::size_t r, std::span<const std::uint8_t> dead,
                        std::span<const double> slice_norms, bool simple_weights,
                        int scale_exponent, std::uint64_t coeff_count,
                        const corecodec::CoreMeta& meta,
                        const std::vector<std::vector<std::span<const std::uint8_t>>>& payloads,
                        int workers) {
    std::vector<double> live_norms;
    for (std::size_t j = 0; j < r; ++j)
        if (!dead[j]) live_norms.push_back(slice_norms[j]);
    if (live_norms.empty()) return Matrix<T>::Zero(n, r);
    if (coeff_count != stored_coefficient_count(n, live_norms.size()))
        throw Error("factor decode: coefficient count mismatch");

    const auto scales = column_scales(live_norms, n, simple_weights);
    corecodec::DecodedCore stream = corecodec::decode(meta, payloads, workers);
    return assemble_factor<T>(n, r, dead, scales, stream.magnitudes, stream.signs,
                              scale_exponent);
}

template Factorized<float> factorize(const Matrix<float>&, double);
template Factorized<double> factorize(const Matrix<double>&, double);
template Matrix<float> reconstruct(const Matrix<float>&);
template Matrix<double> reconstruct(const Matrix<double>&);
template EncodedFactor<float> encode_factor(const Matrix<float>&, std::span<const std::uint8_t>,
                                            std::span<const double>, const FactorEncodeOptions&);
template EncodedFactor<double> encode_factor(const Matrix<double>&, std::span<const std::uint8_t>,
                                             std::span<const double>, const FactorEncodeOptions&);
template Matrix<float> decode_factor(std::size_t, std::size_t, std::span<const std::uint8_t>,
                                     std::span<const double>, bool, int, std::uint64_t,
                                     const corecodec::CoreMeta&,
                                     const std::vector<std::vector<std::span<const std::uint8_t>>>&,
                                     int);
template Matrix<double> decode_factor(std::size_t, std::size_t, std::span<const std::uint8_t>,
                                      std::span<const double>, bool, int, std::uint64_t,
                                      const corecodec::CoreMeta&,
                                      const std::vector<std::vector<std::span<const std::uint8_t>>>&,
                                      int);

}  // namespace tucomp::factorcodec
