#include "tucomp/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "tucomp/kernels.hpp"

namespace tucomp {

bool is_permutation(const ModePermutation& p) {
    std::vector<bool> seen(p.size(), false);
    for (std::size_t v : p) {
        if (v >= p.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

ModePermutation identity_permutation(std::size_t d) {
    ModePermutation p(d);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return p;
}

ModePermutation inverse_permutation(const ModePermutation& p) {
    ModePermutation inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
    return inv;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size());
    std::size_t acc = 1;
    for (std::size_t i = shape.size(); i-- > 0;) {
        strides[i] = acc;
        acc *= shape[i];
    }
    return strides;
}

template <class T>
std::size_t DenseTensor<T>::flat_index(std::span<const std::size_t> multi) const {
    if (multi.size() != shape_.size()) throw Error("tensor: index order mismatch");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < multi.size(); ++i) {
        if (multi[i] >= shape_[i]) throw Error("tensor: index out of range");
        flat = flat * shape_[i] + multi[i];
    }
    return flat;
}

template <class T>
Matrix<T> matricize(const DenseTensor<T>& t, std::size_t mode) {
    const std::size_t d = t.order();
    if (mode >= d) throw Error("matricize: mode out of range");
    const Shape& n = t.shape();
    std::size_t inner = 1, outer = 1;
    for (std::size_t i = mode + 1; i < d; ++i) inner *= n[i];
    for (std::size_t i = 0; i < mode; ++i) outer *= n[i];
    const std::size_t rows = n[mode], cols = outer * inner;

    Matrix<T> m(rows, cols);
    const T* src = t.data();
    // flat = (o * rows + r) * inner + in  maps to  m(r, o * inner + in)
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(src + (o * rows + r) * inner, inner, m.data() + r * cols + o * inner);
    return m;
}

template <class T>
DenseTensor<T> mode_product(const Matrix<T>& m, const DenseTensor<T>& t, std::size_t mode) {
    const std::size_t d = t.order();
    if (mode >= d) throw Error("mode_product: mode out of range");
    const Shape& n = t.shape();
    if (static_cast<std::size_t>(m.cols()) != n[mode])
        throw Error("mode_product: matrix columns do not match mode extent");

    std::size_t inner = 1, outer = 1;
    for (std::size_t i = mode + 1; i < d; ++i) inner *= n[i];
    for (std::size_t i = 0; i < mode; ++i) outer *= n[i];
    const std::size_t rows_in = n[mode];
    const std::size_t rows_out = static_cast<std::size_t>(m.rows());

    Shape out_shape = n;
    out_shape[mode] = rows_out;
    DenseTensor<T> out(std::move(out_shape));

    using Map = Eigen::Map<const Matrix<T>>;
    using MutMap = Eigen::Map<Matrix<T>>;
    for (std::size_t o = 0; o < outer; ++o) {
        Map slice(t.data() + o * rows_in * inner, rows_in, inner);
        MutMap dst(out.data() + o * rows_out * inner, rows_out, inner);
        dst.noalias() = m * slice;
    }
    return out;
}

template <class T>
DenseTensor<T> transpose(const DenseTensor<T>& t, const ModePermutation& p) {
    const std::size_t d = t.order();
    if (p.size() != d || !is_permutation(p)) throw Error("transpose: invalid permutation");

    const Shape& n = t.shape();
    Shape out_shape(d);
    for (std::size_t i = 0; i < d; ++i) out_shape[i] = n[p[i]];
    DenseTensor<T> out(out_shape);

    const auto in_strides = row_major_strides(n);
    // stride of output mode i in the input layout
    std::vector<std::size_t> gather(d);
    for (std::size_t i = 0; i < d; ++i) gather[i] = in_strides[p[i]];

    const std::size_t total = t.size();
    const std::size_t lead = out_shape[0];
    const std::size_t chunk = total / lead;
    const T* src = t.data();
    T* dst = out.data();

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j0 = 0; j0 < static_cast<std::ptrdiff_t>(lead); ++j0) {
        std::vector<std::size_t> idx(d, 0);
        idx[0] = static_cast<std::size_t>(j0);
        std::size_t src_off = static_cast<std::size_t>(j0) * gather[0];
        std::size_t dst_off = static_cast<std::size_t>(j0) * chunk;
        for (std::size_t c = 0; c < chunk; ++c) {
            dst[dst_off + c] = src[src_off];
            // odometer over modes 1..d-1, last fastest
            for (std::size_t m = d; m-- > 1;) {
                src_off += gather[m];
                if (++idx[m] < out_shape[m]) break;
                src_off -= out_shape[m] * gather[m];
                idx[m] = 0;
            }
        }
    }
    return out;
}

template <class T>
double sse_between(const DenseTensor<T>& a, const DenseTensor<T>& b) {
    if (a.shape() != b.shape()) throw Error("sse_between: shape mismatch");
    return kernels::sum_squared_diff(a.data(), b.data(), a.size());
}

template <class T>
double norm_sq(const DenseTensor<T>& t) {
    return kernels::sum_squares(t.data(), t.size());
}

template class DenseTensor<float>;
template class DenseTensor<double>;

template Matrix<float> matricize(const DenseTensor<float>&, std::size_t);
template Matrix<double> matricize(const DenseTensor<double>&, std::size_t);
template DenseTensor<float> mode_product(const Matrix<float>&, const DenseTensor<float>&, std::size_t);
template DenseTensor<double> mode_product(const Matrix<double>&, const DenseTensor<double>&, std::size_t);
template DenseTensor<float> transpose(const DenseTensor<float>&, const ModePermutation&);
template DenseTensor<double> transpose(const DenseTensor<double>&, const ModePermutation&);
template double sse_between(const DenseTensor<float>&, const DenseTensor<float>&);
template double sse_between(const DenseTensor<double>&, const DenseTensor<double>&);
template double norm_sq(const DenseTensor<float>&);
template double norm_sq(const DenseTensor<double>&);

}  // namespace tucomp
