#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tucomp/entropy.hpp"
#include "tucomp/tensor.hpp"
#include "tucomp/vectorize.hpp"

namespace tucomp::corecodec {

/// Core coefficients rounded to 64-bit integers after scaling by 2^k, with
/// 2^63 <= 2^k * max|core| < 2^64. Magnitudes and signs follow the
/// vectorization order.
struct QuantizedCore {
    std::vector<std::uint64_t> magnitudes;
    std::vector<std::uint8_t> signs;  // 1 = negative
    int scale_exponent = 0;
    bool zero_flag = false;
    Shape shape;  // core shape the vectorization order refers to
    std::vector<std::vector<double>> slice_norms;  // per axis of `shape`
};

template <class T>
QuantizedCore quantize(const DenseTensor<T>& core, const vectorize::OrderMap& order);

/// Stop offsets on the last encoded plane: how many positions of each bit
/// category a block includes. Earlier planes are always complete.
struct BlockStops {
    std::uint64_t leading = 0;
    std::uint64_t trailing = 0;
};

struct EncodedCore {
    int last_plane = 63;
    std::uint64_t block_size = 0;
    std::vector<BlockStops> stops;
    // payloads[63 - plane][block]
    std::vector<std::vector<std::vector<std::uint8_t>>> payloads;
    double achieved_sse_int = 0.0;  // exact sum of (m - decoded)^2, integer scale

    std::uint64_t payload_bytes() const;
};

struct EncodeOptions {
    entropy::Coder coder = entropy::Coder::arithmetic;
    int workers = 1;
    std::uint64_t block_size = 0;  // 0 = max(4096, ceil(n / 64))
    bool split_planes = true;
    /// When set, budget logic is bypassed and planes 63..value are encoded in
    /// full (used for the factor coefficient streams).
    std::optional<int> fixed_last_plane;
};

std::uint64_t default_block_size(std::uint64_t n);

/// Bit plane encoder. plan() walks planes most-significant-first, tracking
/// the SSE the decoder will realize (midpoint correction included) and
/// placing the breakpoint; finalize() emits the payload with the given signs.
/// Splitting the two phases lets the caller settle sign flips that depend on
/// the breakpoint (dead factor columns) before any sign bit is written.
class Encoder {
public:
    Encoder(std::span<const std::uint64_t> magnitudes, const EncodeOptions& opts);

    void plan(double target_sse_int);

    /// Decoder-side magnitudes implied by the plan, correction applied.
    const std::vector<std::uint64_t>& decoded_magnitudes() const { return decoded_; }
    int last_plane() const { return last_plane_; }
    const std::vector<BlockStops>& stops() const { return stops_; }
    /// (plane, tracked SSE after the plane) for every fully committed plane.
    const std::vector<std::pair<int, double>>& trace() const { return trace_; }

    EncodedCore finalize(std::span<const std::uint8_t> signs);

private:
    struct Draft {
        std::vector<std::uint8_t> bytes;
        std::size_t raw_offset = 0;  // first byte of the raw bit region
        std::vector<std::pair<std::uint64_t, std::uint64_t>> sign_slots;  // (raw bit, coeff)
        bool full = true;
    };
    struct PlaneBlockStats {
        double red_lead = 0, red_trail = 0;
        std::uint64_t lead_positions = 0, new_ones = 0, trail_positions = 0;
        std::uint64_t entropy_bits = 0;
    };

    Draft build_block(int plane, std::size_t block, std::uint64_t lead_stop,
                      std::uint64_t trail_stop, const std::uint8_t* signs,
                      PlaneBlockStats* stats) const;
    void place_stops(int plane, double need, const PlaneBlockStats& totals,
                     const std::vector<PlaneBlockStats>& stats, const PlaneBlockStats* prev);
    void compute_decoded();
    std::pair<std::size_t, std::size_t> block_range(std::size_t b) const;

    std::span<const std::uint64_t> m_;
    EncodeOptions opts_;
    std::uint64_t block_size_ = 0;
    std::size_t n_blocks_ = 0;
    std::vector<std::int8_t> msb_;
    int last_plane_ = 63;
    std::vector<BlockStops> stops_;
    std::vector<std::vector<Draft>> drafts_;
    std::vector<std::uint64_t> decoded_;
    std::vector<std::pair<int, double>> trace_;
    bool planned_ = false;
};

EncodedCore encode(const QuantizedCore& q, double target_sse_int, const EncodeOptions& opts);

struct DecodedCore {
    std::vector<std::uint64_t> magnitudes;  // correction applied
    std::vector<std::uint8_t> signs;
};

struct CoreMeta {
    std::uint64_t count = 0;
    std::uint64_t block_size = 0;
    int last_plane = 63;
    std::vector<BlockStops> stops;
};

DecodedCore decode(const CoreMeta& meta,
                   const std::vector<std::vector<std::span<const std::uint8_t>>>& payloads,
                   int workers);

/// Per-axis bitmap of slices whose coefficients are all insignificant; the
/// matching factor columns are skipped and decode to zero.
std::vector<std::vector<std::uint8_t>> dead_slices(const Shape& shape,
                                                   const vectorize::OrderMap& order,
                                                   std::span<const std::uint64_t> decoded_magnitudes);

/// Analytic SSE ratio uncorrected/corrected for a coefficient whose bits
/// below plane p are unknown, under the uniform model: 4 for p >= 1, 1 at 0.
double expected_correction_gain(int plane);

}  // namespace tucomp::corecodec
