#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tucomp/tensor.hpp"

namespace tucomp::vectorize {

enum class Method : std::uint8_t {
    lexicographic = 0,
    zigzag = 1,
    zorder = 2,
};

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct Spec {
    Method method = Method::lexicographic;
    ModePermutation storage_order;  // applied to the core before flattening
};

/// Shortest-mode-first storage order: stable ascending sort by extent.
ModePermutation storage_order_heuristic(const Shape& sizes);

/// Walks every cell of `shape` exactly once in the order given by `method`.
///
/// - lexicographic: last index fastest (a plain reshape of the flat layout)
/// - zigzag: ascending coordinate-sum layers, lexicographic inside a layer
/// - zorder: ascending Morton key with out-of-bounds subcubes skipped; mode 0
///   contributes the most significant bit of each interleaved group
class PositionIterator {
public:
    PositionIterator(Method method, Shape shape);

    bool done() const { return done_; }
    const std::vector<std::size_t>& position() const { return pos_; }
    std::uint64_t flat() const;
    void next();

private:
    void zorder_seek_valid();

    Method method_;
    Shape shape_;
    std::vector<std::size_t> pos_;
    std::vector<std::size_t> strides_;
    bool done_ = false;
    // zigzag
    std::size_t layer_ = 0;
    std::size_t layer_max_ = 0;
    // zorder
    std::uint64_t key_ = 0;
    std::uint64_t key_end_ = 0;
    unsigned levels_ = 0;
};

/// Successor of `current` under `method`, or nullopt past the last cell.
std::optional<std::vector<std::size_t>> next_position(Method method,
                                                      std::span<const std::size_t> current,
                                                      const Shape& shape);

/// All N flat (row-major) indices in visiting order.
std::vector<std::uint64_t> full_order(Method method, const Shape& shape);

/// Flat-position lookup for the codec; the identity for lexicographic order,
/// a materialized table otherwise.
class OrderMap {
public:
    static OrderMap build(Method method, const Shape& shape);

    std::uint64_t operator[](std::uint64_t v) const { return identity_ ? v : map_[v]; }
    bool identity() const { return identity_; }
    std::uint64_t size() const { return size_; }

private:
    bool identity_ = true;
    std::uint64_t size_ = 0;
    std::vector<std::uint64_t> map_;
};

}  // namespace tucomp::vectorize
