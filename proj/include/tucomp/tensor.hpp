#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tucomp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

/// 0-based mode permutation: result mode i takes its data from source mode perm[i].
using ModePermutation = std::vector<std::size_t>;

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool is_permutation(const ModePermutation& p);
ModePermutation identity_permutation(std::size_t d);
ModePermutation inverse_permutation(const ModePermutation& p);

std::size_t shape_numel(const Shape& shape);

/// Row-major strides: last index fastest.
std::vector<std::size_t> row_major_strides(const Shape& shape);

/// Dense multidimensional array, elements laid out lexicographically with the
/// last index changing fastest. Immutable by convention once filled: the
/// pipeline passes tensors by const reference or moves them.
template <class T>
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape)
        : shape_(std::move(shape)), elems_(shape_numel(shape_)) {
        check_shape();
    }

    DenseTensor(Shape shape, std::vector<T> elements)
        : shape_(std::move(shape)), elems_(std::move(elements)) {
        check_shape();
        if (elems_.size() != shape_numel(shape_))
            throw Error("tensor: element count does not match shape");
    }

    std::size_t order() const { return shape_.size(); }
    const Shape& shape() const { return shape_; }
    std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
    std::size_t size() const { return elems_.size(); }

    std::span<const T> elements() const { return elems_; }
    std::span<T> elements() { return elems_; }
    const T* data() const { return elems_.data(); }
    T* data() { return elems_.data(); }

    T operator[](std::size_t flat) const { return elems_[flat]; }
    T& operator[](std::size_t flat) { return elems_[flat]; }

    std::size_t flat_index(std::span<const std::size_t> multi) const;
    T at(std::span<const std::size_t> multi) const { return elems_[flat_index(multi)]; }

    /// Reinterprets the flat element sequence under a new shape of equal total
    /// size. Never moves data.
    DenseTensor reshaped(Shape new_shape) && {
        if (shape_numel(new_shape) != elems_.size())
            throw Error("tensor: reshape changes total size");
        return DenseTensor(std::move(new_shape), std::move(elems_));
    }

    std::vector<T> take_elements() && { return std::move(elems_); }

private:
    void check_shape() const {
        for (std::size_t n : shape_)
            if (n == 0) throw Error("tensor: zero-sized mode");
    }

    Shape shape_;
    std::vector<T> elems_;
};

/// Mode-k matricization: an n_k x (N/n_k) matrix whose column j is the j-th
/// mode-k fiber, fibers enumerated lexicographically over the remaining
/// indices with the last one fastest. For k = 0 this is a pure reshape.
template <class T>
Matrix<T> matricize(const DenseTensor<T>& t, std::size_t mode);

/// Mode-k product: result_(k) = m * t_(k). Mode k's extent becomes m.rows().
template <class T>
DenseTensor<T> mode_product(const Matrix<T>& m, const DenseTensor<T>& t, std::size_t mode);

template <class T>
DenseTensor<T> transpose(const DenseTensor<T>& t, const ModePermutation& p);

/// Sum of squared differences, accumulated in double regardless of T.
template <class T>
double sse_between(const DenseTensor<T>& a, const DenseTensor<T>& b);

template <class T>
double norm_sq(const DenseTensor<T>& t);

}  // namespace tucomp
