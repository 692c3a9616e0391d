#include "tucomp/core_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "tucomp/error_model.hpp"
#include "tucomp/kernels.hpp"

namespace tucomp::corecodec {

namespace {

constexpr std::uint64_t kFullStop = ~std::uint64_t{0};

inline double to_d(std::uint64_t v) { return static_cast<double>(v); }

/// Residual of a significant coefficient once planes >= p are encoded and the
/// midpoint correction is applied.
inline double sig_residual(std::uint64_t m, int p) {
    if (p == 0) return 0.0;
    const std::uint64_t low = m & ((std::uint64_t{1} << p) - 1);
    const std::uint64_t half = std::uint64_t{1} << (p - 1);
    return to_d(low) - to_d(half);
}

inline double sig_contrib(std::uint64_t m, int p) {
    const double r = sig_residual(m, p);
    return r * r;
}

inline double insig_contrib(std::uint64_t m) {
    const double v = to_d(m);
    return v * v;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
    if (pos + 4 > in.size()) throw Error("core codec: truncated block payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    return v;
}

}  // namespace

std::uint64_t default_block_size(std::uint64_t n) {
    const std::uint64_t grain = (n + 63) / 64;
    return std::max<std::uint64_t>(4096, grain);
}

template <class T>
QuantizedCore quantize(const DenseTensor<T>& core, const vectorize::OrderMap& order) {
    const std::uint64_t n = core.size();
    if (order.size() != n) throw Error("quantize: order map does not match core");
    if (!kernels::all_finite(core.data(), core.size()))
        throw Error("quantize: non-finite core values");

    QuantizedCore q;
    q.shape = core.shape();
    q.slice_norms.resize(core.order());
    for (std::size_t a = 0; a < core.order(); ++a)
        q.slice_norms[a].assign(core.extent(a), 0.0);

    const double max = kernels::max_abs(core.data(), core.size());
    if (max == 0.0) {
        q.zero_flag = true;
        return q;
    }
    q.scale_exponent = 63 - std::ilogb(max);

    const auto strides = row_major_strides(core.shape());
    q.magnitudes.resize(n);
    q.signs.resize(n);
    for (std::uint64_t v = 0; v < n; ++v) {
        const std::uint64_t pos = order[v];
        const double x = static_cast<double>(core[pos]);
        const double scaled = std::ldexp(std::fabs(x), q.scale_exponent);
        const std::uint64_t m = static_cast<std::uint64_t>(std::nearbyint(scaled));
        q.magnitudes[v] = m;
        q.signs[v] = x < 0 ? 1 : 0;
        const double sq = to_d(m) * to_d(m);
        for (std::size_t a = 0; a < core.order(); ++a)
            q.slice_norms[a][(pos / strides[a]) % core.extent(a)] += sq;
    }
    const double down = std::ldexp(1.0, -2 * q.scale_exponent);
    for (auto& axis : q.slice_norms)
        for (double& s : axis) s = std::sqrt(s * down);
    return q;
}

template QuantizedCore quantize(const DenseTensor<float>&, const vectorize::OrderMap&);
template QuantizedCore quantize(const DenseTensor<double>&, const vectorize::OrderMap&);

std::uint64_t EncodedCore::payload_bytes() const {
    std::uint64_t total = 0;
    for (const auto& plane : payloads)
        for (const auto& block : plane) total += block.size();
    return total;
}

Encoder::Encoder(std::span<const std::uint64_t> magnitudes, const EncodeOptions& opts)
    : m_(magnitudes), opts_(opts) {
    if (opts_.workers < 1) opts_.workers = 1;
    block_size_ = opts_.block_size ? opts_.block_size : default_block_size(m_.size());
    n_blocks_ = m_.empty() ? 0 : (m_.size() + block_size_ - 1) / block_size_;
    msb_.resize(m_.size());
    for (std::size_t i = 0; i < m_.size(); ++i)
        msb_[i] = m_[i] == 0 ? -1 : static_cast<std::int8_t>(63 - std::countl_zero(m_[i]));
}

std::pair<std::size_t, std::size_t> Encoder::block_range(std::size_t b) const {
    const std::size_t lo = b * block_size_;
    return {lo, std::min<std::size_t>(lo + block_size_, m_.size())};
}

Encoder::Draft Encoder::build_block(int plane, std::size_t block, std::uint64_t lead_stop,
                                    std::uint64_t trail_stop, const std::uint8_t* signs,
                                    PlaneBlockStats* stats) const {
    const auto [lo, hi] = block_range(block);
    std::vector<std::uint8_t> column;
    entropy::BitWriter raw;
    Draft d;
    d.full = lead_stop == kFullStop && trail_stop == kFullStop;
    std::uint64_t lead_seen = 0, trail_seen = 0;

    for (std::size_t i = lo; i < hi; ++i) {
        const int msb = msb_[i];
        if (msb > plane) {
            if (trail_seen < trail_stop) {
                const bool bit = (m_[i] >> plane) & 1u;
                raw.push(bit);
                ++trail_seen;
                if (stats) {
                    stats->red_trail += sig_contrib(m_[i], plane + 1) - sig_contrib(m_[i], plane);
                    ++stats->trail_positions;
                }
            }
        } else if (lead_seen < lead_stop) {
            const bool one = msb == plane;
            column.push_back(one ? 1 : 0);
            ++lead_seen;
            if (stats) ++stats->lead_positions;
            if (one) {
                d.sign_slots.emplace_back(raw.bit_count(), i);
                raw.push(signs ? signs[i] != 0 : false);
                if (stats) {
                    stats->red_lead += insig_contrib(m_[i]) - sig_contrib(m_[i], plane);
                    ++stats->new_ones;
                }
            }
        }
    }

    std::vector<std::uint8_t> entropy_payload;
    if (!column.empty()) {
        const auto runs = entropy::rle_extract(column);
        entropy_payload = entropy::encode_symbols(opts_.coder, runs.runs);
    }
    if (stats) stats->entropy_bits = entropy_payload.size() * 8;

    put_u32(d.bytes, static_cast<std::uint32_t>(entropy_payload.size()));
    d.bytes.insert(d.bytes.end(), entropy_payload.begin(), entropy_payload.end());
    d.raw_offset = d.bytes.size();
    const auto raw_bytes = std::move(raw).finish();
    d.bytes.insert(d.bytes.end(), raw_bytes.begin(), raw_bytes.end());
    return d;
}

void Encoder::plan(double target_sse_int) {
    if (planned_) throw Error("core codec: plan called twice");
    planned_ = true;
    stops_.assign(n_blocks_, BlockStops{});
    if (m_.empty()) {
        last_plane_ = 63;
        compute_decoded();
        return;
    }

    double tracked = errormodel::backward_sum_sse(m_);
    double reference = tracked;
    std::uint64_t terms = 0;

    const int floor_plane = opts_.fixed_last_plane ? *opts_.fixed_last_plane : 0;
    const bool budgeted = !opts_.fixed_last_plane;

    if (budgeted && tracked <= target_sse_int) {
        // nothing worth encoding at all
        last_plane_ = 63;
        compute_decoded();
        return;
    }

    std::vector<PlaneBlockStats> stats(n_blocks_);
    PlaneBlockStats prev_totals;
    bool have_prev = false;

    for (int p = 63; p >= floor_plane; --p) {
        std::vector<Draft> plane_drafts(n_blocks_);
#pragma omp parallel for schedule(dynamic) num_threads(opts_.workers)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks_); ++b) {
            stats[b] = PlaneBlockStats{};
            plane_drafts[b] =
                build_block(p, b, kFullStop, kFullStop, nullptr, &stats[b]);
        }

        PlaneBlockStats totals;
        for (const auto& s : stats) {
            totals.red_lead += s.red_lead;
            totals.red_trail += s.red_trail;
            totals.lead_positions += s.lead_positions;
            totals.new_ones += s.new_ones;
            totals.trail_positions += s.trail_positions;
            totals.entropy_bits += s.entropy_bits;
        }
        const double plane_red = totals.red_lead + totals.red_trail;

        if (budgeted && tracked - plane_red <= target_sse_int) {
            // Breakpoint plane found: re-derive the bit placement with stop
            // offsets instead of keeping the full pass.
            last_plane_ = p;
            drafts_.push_back(std::move(plane_drafts));
            place_stops(p, tracked - target_sse_int, totals, stats,
                        have_prev ? &prev_totals : nullptr);
            compute_decoded();
            return;
        }

        tracked -= plane_red;
        drafts_.push_back(std::move(plane_drafts));
        trace_.emplace_back(p, tracked);
        terms += totals.new_ones + totals.trail_positions;
        if (errormodel::recalibration_due(terms, reference, tracked)) {
            tracked = errormodel::recalibrate_sse(m_, p);
            reference = tracked;
            terms = 0;
            trace_.back().second = tracked;
        }
        prev_totals = totals;
        have_prev = true;
    }

    // budget never reached (or a fixed floor): everything down to floor_plane
    last_plane_ = floor_plane;
    for (auto& s : stops_) s = BlockStops{kFullStop, kFullStop};
    compute_decoded();
}

void Encoder::place_stops(int plane, double need, const PlaneBlockStats& totals,
                          const std::vector<PlaneBlockStats>& stats,
                          const PlaneBlockStats* prev) {
    // Category priority: measured efficiency (SSE reduction per payload bit)
    // of the previous plane; leading wins ties and the first plane.
    bool lead_first = true;
    if (opts_.split_planes && prev) {
        const double lead_cost = static_cast<double>(prev->entropy_bits + prev->new_ones);
        const double trail_cost = static_cast<double>(prev->trail_positions);
        const double eff_lead = lead_cost > 0 ? prev->red_lead / lead_cost
                                              : (prev->red_lead > 0 ? HUGE_VAL : 0.0);
        const double eff_trail = trail_cost > 0 ? prev->red_trail / trail_cost
                                                : (prev->red_trail > 0 ? HUGE_VAL : 0.0);
        lead_first = eff_lead >= eff_trail;
    }

    if (!opts_.split_planes) {
        // single interleaved scan in position order
        double cum = 0;
        std::size_t b = 0;
        for (; b < n_blocks_; ++b) {
            const double block_red = stats[b].red_lead + stats[b].red_trail;
            if (cum + block_red >= need) break;
            cum += block_red;
            stops_[b] = {kFullStop, kFullStop};
        }
        if (b == n_blocks_) return;  // numerical edge: treat the tail as full
        const auto [lo, hi] = block_range(b);
        std::uint64_t leads = 0, trails = 0;
        for (std::size_t i = lo; i < hi && cum < need; ++i) {
            const int msb = msb_[i];
            if (msb > plane) {
                cum += sig_contrib(m_[i], plane + 1) - sig_contrib(m_[i], plane);
                ++trails;
            } else {
                if (msb == plane) cum += insig_contrib(m_[i]) - sig_contrib(m_[i], plane);
                ++leads;
            }
        }
        stops_[b] = {leads, trails};
        return;
    }

    auto scan_category = [&](bool leading, double need_left) {
        // all blocks of this category up to the crossing point
        double cum = 0;
        std::size_t b = 0;
        for (; b < n_blocks_; ++b) {
            const double block_red = leading ? stats[b].red_lead : stats[b].red_trail;
            if (cum + block_red >= need_left) break;
            cum += block_red;
            if (leading)
                stops_[b].leading = kFullStop;
            else
                stops_[b].trailing = kFullStop;
        }
        if (b == n_blocks_) return;
        const auto [lo, hi] = block_range(b);
        std::uint64_t count = 0;
        for (std::size_t i = lo; i < hi && cum < need_left; ++i) {
            const int msb = msb_[i];
            if (leading) {
                if (msb > plane) continue;
                if (msb == plane) cum += insig_contrib(m_[i]) - sig_contrib(m_[i], plane);
                ++count;
            } else {
                if (msb <= plane) continue;
                cum += sig_contrib(m_[i], plane + 1) - sig_contrib(m_[i], plane);
                ++count;
            }
        }
        if (leading)
            stops_[b].leading = count;
        else
            stops_[b].trailing = count;
    };

    const double first_red = lead_first ? totals.red_lead : totals.red_trail;
    if (first_red >= need) {
        scan_category(lead_first, need);
        return;
    }
    // the preferred category is exhausted in full before the other starts
    for (auto& s : stops_) {
        if (lead_first)
            s.leading = kFullStop;
        else
            s.trailing = kFullStop;
    }
    scan_category(!lead_first, need - first_red);
}

void Encoder::compute_decoded() {
    decoded_.assign(m_.size(), 0);
#pragma omp parallel for schedule(static) num_threads(opts_.workers)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(n_blocks_); ++bb) {
        const std::size_t b = static_cast<std::size_t>(bb);
        const auto [lo, hi] = block_range(b);
        std::uint64_t lead_seen = 0, trail_seen = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            const int msb = msb_[i];
            int p_enc;
            if (msb > last_plane_) {
                p_enc = (trail_seen++ < stops_[b].trailing) ? last_plane_ : last_plane_ + 1;
            } else {
                // a leading position on the breakpoint plane, zero bits included
                const bool within = lead_seen++ < stops_[b].leading;
                if (msb != last_plane_ || !within) continue;  // stays insignificant
                p_enc = last_plane_;
            }
            std::uint64_t v = (m_[i] >> p_enc) << p_enc;
            if (p_enc >= 1) v += std::uint64_t{1} << (p_enc - 1);
            decoded_[i] = v;
        }
    }
}

EncodedCore Encoder::finalize(std::span<const std::uint8_t> signs) {
    if (!planned_) throw Error("core codec: finalize before plan");
    if (signs.size() != m_.size()) throw Error("core codec: sign count mismatch");

    EncodedCore out;
    out.last_plane = last_plane_;
    out.block_size = block_size_;
    out.stops = stops_;
    out.payloads.resize(drafts_.size());

    for (std::size_t rel = 0; rel < drafts_.size(); ++rel) {
        const int plane = 63 - static_cast<int>(rel);
        out.payloads[rel].resize(n_blocks_);
#pragma omp parallel for schedule(dynamic) num_threads(opts_.workers)
        for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(n_blocks_); ++bb) {
            const std::size_t b = static_cast<std::size_t>(bb);
            Draft& d = drafts_[rel][b];
            const bool on_breakpoint = plane == last_plane_;
            const bool full = stops_[b].leading == kFullStop && stops_[b].trailing == kFullStop;
            if (on_breakpoint && !full) {
                Draft rebuilt = build_block(plane, b, stops_[b].leading, stops_[b].trailing,
                                            signs.data(), nullptr);
                out.payloads[rel][b] = std::move(rebuilt.bytes);
            } else {
                for (const auto& [bit, coeff] : d.sign_slots) {
                    if (signs[coeff]) {
                        d.bytes[d.raw_offset + (bit >> 3)] |=
                            static_cast<std::uint8_t>(0x80u >> (bit & 7));
                    }
                }
                out.payloads[rel][b] = std::move(d.bytes);
            }
        }
    }
    drafts_.clear();

    // exact achieved error, accumulated backward like the initial norm
    double sse = 0;
    for (std::size_t i = m_.size(); i-- > 0;) {
        const double r = to_d(m_[i]) - to_d(decoded_[i]);
        sse += r * r;
    }
    out.achieved_sse_int = sse;
    return out;
}

EncodedCore encode(const QuantizedCore& q, double target_sse_int, const EncodeOptions& opts) {
    Encoder enc(q.magnitudes, opts);
    enc.plan(target_sse_int);
    return enc.finalize(q.signs);
}

DecodedCore decode(const CoreMeta& meta,
                   const std::vector<std::vector<std::span<const std::uint8_t>>>& payloads,
                   int workers) {
    if (workers < 1) workers = 1;
    const std::uint64_t n = meta.count;
    const std::uint64_t bs = meta.block_size;
    if (bs == 0 && n > 0) throw Error("core decode: zero block size");
    const std::size_t n_blocks = n == 0 ? 0 : (n + bs - 1) / bs;
    if (meta.stops.size() != n_blocks) throw Error("core decode: stop table size mismatch");
    for (const auto& plane : payloads)
        if (plane.size() != n_blocks) throw Error("core decode: payload block count mismatch");
    const std::size_t planes = payloads.size();
    if (planes != static_cast<std::size_t>(64 - meta.last_plane) &&
        !(planes == 0 && meta.last_plane == 63))
        throw Error("core decode: plane count does not match last plane");

    DecodedCore out;
    out.magnitudes.assign(n, 0);
    out.signs.assign(n, 0);
    std::vector<std::uint8_t> p_enc(n, 0);

    bool failed = false;
    std::string failure;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(n_blocks); ++bb) {
        const std::size_t b = static_cast<std::size_t>(bb);
        const std::size_t lo = b * bs;
        const std::size_t hi = std::min<std::size_t>(lo + bs, n);
        try {
            for (std::size_t rel = 0; rel < planes; ++rel) {
                const int plane = 63 - static_cast<int>(rel);
                const bool last = plane == meta.last_plane;
                const std::uint64_t lead_stop = last ? meta.stops[b].leading : kFullStop;
                const std::uint64_t trail_stop = last ? meta.stops[b].trailing : kFullStop;

                const auto payload = payloads[rel][b];
                const std::uint32_t entropy_len = get_u32(payload, 0);
                if (4 + static_cast<std::size_t>(entropy_len) > payload.size())
                    throw Error("core decode: entropy section overruns payload");

                std::uint64_t insig = 0;
                for (std::size_t i = lo; i < hi; ++i)
                    if (out.magnitudes[i] == 0) ++insig;
                const std::uint64_t column_len = std::min<std::uint64_t>(insig, lead_stop);

                std::vector<std::uint8_t> column;
                if (column_len > 0) {
                    if (entropy_len == 0) throw Error("core decode: missing leading column");
                    const auto symbols =
                        entropy::decode_symbols(payload.subspan(4, entropy_len));
                    column = entropy::rle_restore({symbols}, column_len);
                }
                entropy::BitReader raw(payload.subspan(4 + entropy_len));

                std::uint64_t lead_used = 0, trail_used = 0, col_pos = 0;
                for (std::size_t i = lo; i < hi; ++i) {
                    if (out.magnitudes[i] != 0) {
                        if (trail_used < trail_stop) {
                            if (raw.read()) out.magnitudes[i] |= std::uint64_t{1} << plane;
                            p_enc[i] = static_cast<std::uint8_t>(plane);
                            ++trail_used;
                        }
                    } else if (lead_used < lead_stop && col_pos < column.size()) {
                        const bool one = column[col_pos++] != 0;
                        ++lead_used;
                        if (one) {
                            out.magnitudes[i] = std::uint64_t{1} << plane;
                            out.signs[i] = raw.read() ? 1 : 0;
                            p_enc[i] = static_cast<std::uint8_t>(plane);
                        }
                    }
                }
            }
            for (std::size_t i = lo; i < hi; ++i) {
                if (out.magnitudes[i] != 0 && p_enc[i] >= 1)
                    out.magnitudes[i] += std::uint64_t{1} << (p_enc[i] - 1);
            }
        } catch (const std::exception& e) {
#pragma omp critical
            {
                failed = true;
                failure = "block " + std::to_string(b) + ": " + e.what();
            }
        }
    }
    if (failed) throw Error("core decode: " + failure);
    return out;
}

std::vector<std::vector<std::uint8_t>> dead_slices(const Shape& shape,
                                                   const vectorize::OrderMap& order,
                                                   std::span<const std::uint64_t> decoded) {
    std::vector<std::vector<std::uint8_t>> dead(shape.size());
    for (std::size_t a = 0; a < shape.size(); ++a) dead[a].assign(shape[a], 1);
    const auto strides = row_major_strides(shape);
    for (std::uint64_t v = 0; v < decoded.size(); ++v) {
        if (decoded[v] == 0) continue;
        const std::uint64_t pos = order[v];
        for (std::size_t a = 0; a < shape.size(); ++a)
            dead[a][(pos / strides[a]) % shape[a]] = 0;
    }
    return dead;
}

double expected_correction_gain(int plane) {
    if (plane < 0) throw Error("correction gain: negative plane");
    return plane == 0 ? 1.0 : 4.0;
}

}  // namespace tucomp::corecodec
