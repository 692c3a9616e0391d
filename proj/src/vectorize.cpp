#include "tucomp/vectorize.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace tucomp::vectorize {

const char* method_name(Method m) {
    switch (m) {
        case Method::lexicographic: return "lex";
        case Method::zigzag: return "zigzag";
        case Method::zorder: return "zorder";
    }
    return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "lex" || name == "lexicographic") return Method::lexicographic;
    if (name == "zigzag") return Method::zigzag;
    if (name == "zorder") return Method::zorder;
    return std::nullopt;
}

ModePermutation storage_order_heuristic(const Shape& sizes) {
    ModePermutation p = identity_permutation(sizes.size());
    std::stable_sort(p.begin(), p.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
    return p;
}

namespace {

unsigned bits_for(std::size_t extent) {
    return extent <= 1 ? 0u : static_cast<unsigned>(std::bit_width(extent - 1));
}

}  // namespace

PositionIterator::PositionIterator(Method method, Shape shape)
    : method_(method), shape_(std::move(shape)), pos_(shape_.size(), 0),
      strides_(row_major_strides(shape_)) {
    if (shape_.empty()) throw Error("vectorize: empty shape");
    const std::size_t d = shape_.size();
    if (method_ == Method::zigzag) {
        layer_max_ = 0;
        for (std::size_t n : shape_) layer_max_ += n - 1;
    } else if (method_ == Method::zorder) {
        unsigned levels = 0;
        for (std::size_t n : shape_) levels = std::max(levels, bits_for(n));
        levels_ = levels;
        if (levels_ * d > 63) throw Error("vectorize: shape too large for 64-bit Morton keys");
        key_ = 0;
        key_end_ = std::uint64_t{1} << (levels_ * d);
    }
}

std::uint64_t PositionIterator::flat() const {
    std::uint64_t f = 0;
    for (std::size_t i = 0; i < pos_.size(); ++i) f += pos_[i] * strides_[i];
    return f;
}

void PositionIterator::zorder_seek_valid() {
    const std::size_t d = shape_.size();
    while (key_ < key_end_) {
        bool ok = true;
        for (std::size_t a = 0; a < d && ok; ++a) {
            std::uint64_t c = 0;
            for (unsigned t = levels_; t-- > 0;)
                c = (c << 1) | ((key_ >> (t * d + (d - 1 - a))) & 1u);
            if (c >= shape_[a]) {
                // Skip the whole subcube below the first bit where c exceeds
                // the largest valid coordinate.
                std::uint64_t bad = c ^ (shape_[a] - 1);
                unsigned t = 63u - static_cast<unsigned>(std::countl_zero(bad));
                unsigned g = t * static_cast<unsigned>(d) + static_cast<unsigned>(d - 1 - a);
                key_ = (key_ | ((std::uint64_t{1} << g) - 1)) + 1;
                ok = false;
            } else {
                pos_[a] = static_cast<std::size_t>(c);
            }
        }
        if (ok) return;
    }
    done_ = true;
}

void PositionIterator::next() {
    if (done_) throw Error("vectorize: iterator past the end");
    const std::size_t d = shape_.size();
    switch (method_) {
        case Method::lexicographic: {
            for (std::size_t m = d; m-- > 0;) {
                if (++pos_[m] < shape_[m]) return;
                pos_[m] = 0;
            }
            done_ = true;
            return;
        }
        case Method::zigzag: {
            // Successor inside the current layer: bump the deepest index that
            // can take one unit from its tail, then push the rest as far
            // right as possible.
            std::size_t tail = 0;
            for (std::size_t i = d - 1; i-- > 0;) {
                tail += pos_[i + 1];
                if (tail >= 1 && pos_[i] + 1 <= shape_[i] - 1) {
                    pos_[i] += 1;
                    std::size_t rem = tail - 1;
                    for (std::size_t j = d; j-- > i + 1;) {
                        pos_[j] = std::min(rem, shape_[j] - 1);
                        rem -= pos_[j];
                    }
                    return;
                }
            }
            // first element of the next layer
            if (++layer_ > layer_max_) {
                done_ = true;
                return;
            }
            std::size_t rem = layer_;
            for (std::size_t j = d; j-- > 0;) {
                pos_[j] = std::min(rem, shape_[j] - 1);
                rem -= pos_[j];
            }
            return;
        }
        case Method::zorder: {
            ++key_;
            zorder_seek_valid();
            return;
        }
    }
}

std::optional<std::vector<std::size_t>> next_position(Method method,
                                                      std::span<const std::size_t> current,
                                                      const Shape& shape) {
    if (current.size() != shape.size()) throw Error("next_position: order mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (current[i] >= shape[i]) throw Error("next_position: position out of bounds");

    PositionIterator it(method, shape);
    std::vector<std::size_t> cur(current.begin(), current.end());
    // Seek then step. Iterators are cheap; this convenience form is O(N) and
    // meant for tests and small cores.
    while (!it.done() && it.position() != cur) it.next();
    if (it.done()) throw Error("next_position: position not reachable");
    it.next();
    if (it.done()) return std::nullopt;
    return it.position();
}

std::vector<std::uint64_t> full_order(Method method, const Shape& shape) {
    std::vector<std::uint64_t> order;
    order.reserve(shape_numel(shape));
    for (PositionIterator it(method, shape); !it.done(); it.next()) order.push_back(it.flat());
    return order;
}

OrderMap OrderMap::build(Method method, const Shape& shape) {
    OrderMap m;
    m.size_ = shape_numel(shape);
    if (method == Method::lexicographic) return m;
    m.identity_ = false;
    m.map_ = full_order(method, shape);
    return m;
}

}  // namespace tucomp::vectorize
