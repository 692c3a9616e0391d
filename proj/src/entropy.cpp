#include "tucomp/entropy.hpp"

#include <algorithm>
#include <map>

#include "tucomp/tensor.hpp"  // Error

namespace tucomp::entropy {

const char* coder_name(Coder c) {
    return c == Coder::arithmetic ? "ac" : "rans";
}

std::optional<Coder> coder_from_name(const std::string& name) {
    if (name == "ac" || name == "arithmetic") return Coder::arithmetic;
    if (name == "rans") return Coder::rans;
    return std::nullopt;
}

// --- bit I/O ---

void BitWriter::push(bool bit) {
    const std::size_t byte = bit_count_ >> 3;
    if (byte == bytes_.size()) bytes_.push_back(0);
    if (bit) bytes_[byte] |= static_cast<std::uint8_t>(0x80u >> (bit_count_ & 7));
    ++bit_count_;
}

void BitWriter::push_bits(std::uint64_t value, unsigned nbits) {
    for (unsigned i = nbits; i-- > 0;) push((value >> i) & 1u);
}

std::vector<std::uint8_t> BitWriter::finish() && { return std::move(bytes_); }

bool BitReader::read() {
    const std::size_t byte = pos_ >> 3;
    if (byte >= bytes_.size()) throw Error("bit reader: read past end");
    bool bit = (bytes_[byte] >> (7 - (pos_ & 7))) & 1u;
    ++pos_;
    return bit;
}

std::uint64_t BitReader::read_bits(unsigned nbits) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < nbits; ++i) v = (v << 1) | (read() ? 1u : 0u);
    return v;
}

// --- run-length framing ---

RunLengthStream rle_extract(std::span<const std::uint8_t> bits01) {
    RunLengthStream s;
    std::uint64_t run = 0;
    for (std::uint8_t b : bits01) {
        if (b) {
            s.runs.push_back(run);
            run = 0;
        } else {
            ++run;
        }
    }
    s.runs.push_back(run);  // zeros after the last 1 (possibly the whole column)
    return s;
}

std::vector<std::uint8_t> rle_restore(const RunLengthStream& stream, std::size_t bit_count) {
    if (stream.runs.empty()) throw Error("rle: empty stream");
    std::vector<std::uint8_t> bits;
    bits.reserve(bit_count);
    for (std::size_t i = 0; i + 1 < stream.runs.size(); ++i) {
        bits.insert(bits.end(), stream.runs[i], 0);
        bits.push_back(1);
    }
    bits.insert(bits.end(), stream.runs.back(), 0);
    if (bits.size() != bit_count) throw Error("rle: run lengths do not match column length");
    return bits;
}

// --- range coder ---

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
    range_ /= total;
    low_ += static_cast<std::uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTop) {
        shift_low();
        range_ <<= 8;
    }
}

void RangeEncoder::encode_raw(std::uint64_t value, unsigned nbits) {
    for (unsigned i = nbits; i-- > 0;) {
        std::uint32_t bit = (value >> i) & 1u;
        encode(bit, 1, 2);
    }
}

void RangeEncoder::flush() {
    for (int i = 0; i < 5; ++i) shift_low();
}

void RangeEncoder::shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
        std::uint8_t b = cache_;
        do {
            out_.push_back(static_cast<std::uint8_t>(b + carry));
            b = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
    return pos_ < in_.size() ? in_[pos_++] : 0;
}

std::uint32_t RangeDecoder::threshold(std::uint32_t total) {
    range_ /= total;
    std::uint32_t t = code_ / range_;
    return t >= total ? total - 1 : t;
}

void RangeDecoder::update(std::uint32_t cum, std::uint32_t freq, std::uint32_t) {
    code_ -= cum * range_;
    range_ *= freq;
    while (range_ < kTop) {
        code_ = (code_ << 8) | next_byte();
        range_ <<= 8;
    }
}

std::uint64_t RangeDecoder::decode_raw(unsigned nbits) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < nbits; ++i) {
        std::uint32_t t = threshold(2);
        update(t, 1, 2);
        v = (v << 1) | t;
    }
    return v;
}

// --- adaptive model ---

AdaptiveModel::AdaptiveModel() {
    symbols_.push_back(0);  // escape
    counts_.push_back(1);
    fenwick_.assign(2, 0);
    fenwick_add(0, 1);
    total_ = 1;
}

void AdaptiveModel::fenwick_add(std::uint32_t index, std::int64_t delta) {
    for (std::uint32_t i = index + 1; i < fenwick_.size(); i += i & (~i + 1))
        fenwick_[i] = static_cast<std::uint32_t>(fenwick_[i] + delta);
}

std::uint32_t AdaptiveModel::prefix(std::uint32_t index) const {
    std::uint32_t s = 0;
    for (std::uint32_t i = index; i > 0; i -= i & (~i + 1)) s += fenwick_[i];
    return s;
}

std::uint32_t AdaptiveModel::index_for_target(std::uint32_t target) const {
    // largest index whose prefix sum is <= target
    std::uint32_t idx = 0;
    std::uint32_t rem = target;
    std::uint32_t mask = 1;
    while ((mask << 1) < fenwick_.size()) mask <<= 1;
    for (; mask != 0; mask >>= 1) {
        std::uint32_t next = idx + mask;
        if (next < fenwick_.size() && fenwick_[next] <= rem) {
            idx = next;
            rem -= fenwick_[next];
        }
    }
    return idx;  // 0-based index of the symbol whose interval contains target
}

void AdaptiveModel::bump(std::uint32_t index) {
    if (total_ + kIncrement >= kMaxTotal) halve();
    counts_[index] += kIncrement;
    total_ += kIncrement;
    fenwick_add(index, kIncrement);
}

void AdaptiveModel::insert(std::uint64_t symbol) {
    const std::uint32_t index = static_cast<std::uint32_t>(symbols_.size());
    if (total_ + kIncrement >= kMaxTotal) halve();
    symbols_.push_back(symbol);
    counts_.push_back(kIncrement);
    if (symbols_.size() + 1 > fenwick_.size()) {
        // grow and rebuild
        std::size_t cap = fenwick_.size();
        while (cap < symbols_.size() + 1) cap *= 2;
        fenwick_.assign(cap, 0);
        for (std::uint32_t i = 0; i < counts_.size() - 1; ++i) fenwick_add(i, counts_[i]);
    }
    fenwick_add(index, kIncrement);
    total_ += kIncrement;
    auto pos = std::lower_bound(lookup_.begin(), lookup_.end(),
                                std::make_pair(symbol, std::uint32_t{0}));
    lookup_.insert(pos, {symbol, index});
}

void AdaptiveModel::halve() {
    total_ = 0;
    std::fill(fenwick_.begin(), fenwick_.end(), 0);
    for (std::uint32_t i = 0; i < counts_.size(); ++i) {
        counts_[i] = std::max(1u, counts_[i] >> 1);
        total_ += counts_[i];
        fenwick_add(i, counts_[i]);
    }
}

void AdaptiveModel::encode(RangeEncoder& enc, std::uint64_t symbol) {
    auto it = std::lower_bound(lookup_.begin(), lookup_.end(),
                               std::make_pair(symbol, std::uint32_t{0}));
    if (it != lookup_.end() && it->first == symbol) {
        const std::uint32_t index = it->second;
        enc.encode(prefix(index), counts_[index], total_);
        bump(index);
    } else {
        enc.encode(0, counts_[0], total_);  // escape occupies the first interval
        if (symbol > 0xFFFFFFFFull) throw Error("entropy: run length exceeds 32 bits");
        enc.encode_raw(symbol, 32);
        insert(symbol);
    }
}

std::uint64_t AdaptiveModel::decode(RangeDecoder& dec) {
    const std::uint32_t target = dec.threshold(total_);
    const std::uint32_t index = index_for_target(target);
    dec.update(prefix(index), counts_[index], total_);
    if (index == 0) {
        std::uint64_t symbol = dec.decode_raw(32);
        insert(symbol);
        return symbol;
    }
    std::uint64_t symbol = symbols_[index];
    bump(index);
    return symbol;
}

// --- rANS with a semi-static per-payload table ---

namespace {

constexpr std::uint64_t kRansLow = 1ull << 31;

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v) | 0x80u);
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t v = 0;
    unsigned shift = 0;
    while (true) {
        if (pos >= in.size()) throw Error("entropy: truncated varint");
        std::uint8_t b = in[pos++];
        v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
        if (!(b & 0x80)) break;
        shift += 7;
        if (shift > 63) throw Error("entropy: varint overflow");
    }
    return v;
}

struct RansTable {
    std::uint32_t scale_bits = 12;
    std::vector<std::uint64_t> syms;   // ascending
    std::vector<std::uint32_t> freqs;  // sums to 1 << scale_bits
    std::vector<std::uint32_t> cum;    // exclusive prefix, plus total at the back
};

RansTable build_table(std::span<const std::uint64_t> symbols) {
    std::map<std::uint64_t, std::uint64_t> hist;
    for (std::uint64_t s : symbols) ++hist[s];

    RansTable t;
    while ((1ull << t.scale_bits) < hist.size()) ++t.scale_bits;
    const std::uint64_t scale = 1ull << t.scale_bits;

    t.syms.reserve(hist.size());
    t.freqs.reserve(hist.size());
    std::uint64_t assigned = 0;
    for (const auto& [sym, cnt] : hist) {
        std::uint64_t f = cnt * scale / symbols.size();
        if (f == 0) f = 1;
        t.syms.push_back(sym);
        t.freqs.push_back(static_cast<std::uint32_t>(f));
        assigned += f;
    }
    // Fix the quantized total deterministically: adjust the most frequent
    // entries first (largest freq, then lowest index).
    while (assigned != scale) {
        std::size_t pick = 0;
        for (std::size_t i = 1; i < t.freqs.size(); ++i) {
            if (assigned < scale ? t.freqs[i] > t.freqs[pick]
                                 : (t.freqs[i] > t.freqs[pick] && t.freqs[i] > 1))
                pick = i;
        }
        if (assigned < scale) {
            ++t.freqs[pick];
            ++assigned;
        } else {
            if (t.freqs[pick] <= 1) throw Error("entropy: cannot normalize rans table");
            --t.freqs[pick];
            --assigned;
        }
    }
    t.cum.resize(t.freqs.size() + 1, 0);
    for (std::size_t i = 0; i < t.freqs.size(); ++i) t.cum[i + 1] = t.cum[i] + t.freqs[i];
    return t;
}

void serialize_table(std::vector<std::uint8_t>& out, const RansTable& t) {
    put_varint(out, t.syms.size());
    put_varint(out, t.scale_bits);
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < t.syms.size(); ++i) {
        put_varint(out, t.syms[i] - prev);
        put_varint(out, t.freqs[i]);
        prev = t.syms[i];
    }
}

RansTable parse_table(std::span<const std::uint8_t> in, std::size_t& pos) {
    RansTable t;
    const std::uint64_t n = get_varint(in, pos);
    t.scale_bits = static_cast<std::uint32_t>(get_varint(in, pos));
    if (t.scale_bits > 20) throw Error("entropy: bad rans table");
    t.syms.resize(n);
    t.freqs.resize(n);
    std::uint64_t prev = 0;
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        prev += get_varint(in, pos);
        t.syms[i] = prev;
        t.freqs[i] = static_cast<std::uint32_t>(get_varint(in, pos));
        total += t.freqs[i];
    }
    if (n > 0 && total != (1ull << t.scale_bits)) throw Error("entropy: bad rans table total");
    t.cum.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + t.freqs[i];
    return t;
}

void rans_encode_payload(std::vector<std::uint8_t>& out, std::span<const std::uint64_t> symbols) {
    const RansTable t = build_table(symbols);
    serialize_table(out, t);

    std::vector<std::uint32_t> index_of(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        auto it = std::lower_bound(t.syms.begin(), t.syms.end(), symbols[i]);
        index_of[i] = static_cast<std::uint32_t>(it - t.syms.begin());
    }

    std::uint64_t state = kRansLow;
    std::vector<std::uint32_t> words;
    for (std::size_t i = symbols.size(); i-- > 0;) {
        const std::uint32_t f = t.freqs[index_of[i]];
        const std::uint64_t x_max = ((kRansLow >> t.scale_bits) << 32) * f;
        while (state >= x_max) {
            words.push_back(static_cast<std::uint32_t>(state));
            state >>= 32;
        }
        state = ((state / f) << t.scale_bits) + (state % f) + t.cum[index_of[i]];
    }
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(state >> (8 * i)));
    // words are consumed in reverse emission order during decoding
    for (std::size_t i = words.size(); i-- > 0;)
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(words[i] >> (8 * b)));
}

void rans_decode_payload(std::span<const std::uint8_t> in, std::size_t count,
                         std::vector<std::uint64_t>& out) {
    std::size_t pos = 0;
    const RansTable t = parse_table(in, pos);
    if (count > 0 && t.syms.empty()) throw Error("entropy: empty rans table");

    auto read_u32 = [&]() {
        if (pos + 4 > in.size()) throw Error("entropy: truncated rans payload");
        std::uint32_t v = static_cast<std::uint32_t>(in[pos]) |
                          (static_cast<std::uint32_t>(in[pos + 1]) << 8) |
                          (static_cast<std::uint32_t>(in[pos + 2]) << 16) |
                          (static_cast<std::uint32_t>(in[pos + 3]) << 24);
        pos += 4;
        return v;
    };

    if (pos + 8 > in.size()) throw Error("entropy: truncated rans payload");
    std::uint64_t state = 0;
    for (int i = 0; i < 8; ++i) state |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    pos += 8;

    const std::uint64_t mask = (1ull << t.scale_bits) - 1;
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t slot = static_cast<std::uint32_t>(state & mask);
        auto it = std::upper_bound(t.cum.begin(), t.cum.end(), slot);
        const std::size_t idx = static_cast<std::size_t>(it - t.cum.begin()) - 1;
        if (idx >= t.syms.size()) throw Error("entropy: corrupt rans payload");
        out.push_back(t.syms[idx]);
        state = t.freqs[idx] * (state >> t.scale_bits) + slot - t.cum[idx];
        while (state < kRansLow) state = (state << 32) | read_u32();
    }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

std::vector<std::uint8_t> encode_symbols(Coder coder, std::span<const std::uint64_t> symbols) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(coder));
    if (symbols.size() > 0xFFFFFFFFull) throw Error("entropy: too many symbols");
    put_u32(out, static_cast<std::uint32_t>(symbols.size()));
    if (symbols.empty()) return out;

    if (coder == Coder::arithmetic) {
        RangeEncoder enc(out);
        AdaptiveModel model;
        for (std::uint64_t s : symbols) model.encode(enc, s);
        enc.flush();
    } else {
        rans_encode_payload(out, symbols);
    }
    return out;
}

std::vector<std::uint64_t> decode_symbols(std::span<const std::uint8_t> payload) {
    if (payload.size() < 5) throw Error("entropy: truncated payload");
    const Coder coder = static_cast<Coder>(payload[0]);
    std::uint32_t count = 0;
    for (int i = 0; i < 4; ++i) count |= static_cast<std::uint32_t>(payload[1 + i]) << (8 * i);

    std::vector<std::uint64_t> symbols;
    symbols.reserve(count);
    auto body = payload.subspan(5);
    if (count == 0) return symbols;

    if (coder == Coder::arithmetic) {
        RangeDecoder dec(body);
        AdaptiveModel model;
        for (std::uint32_t i = 0; i < count; ++i) symbols.push_back(model.decode(dec));
    } else if (coder == Coder::rans) {
        rans_decode_payload(body, count, symbols);
    } else {
        throw Error("entropy: unknown coder id");
    }
    return symbols;
}

}  // namespace tucomp::entropy
