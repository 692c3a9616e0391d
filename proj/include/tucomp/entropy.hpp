#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tucomp::entropy {

enum class Coder : std::uint8_t {
    arithmetic = 0,
    rans = 1,
};

const char* coder_name(Coder c);
std::optional<Coder> coder_from_name(const std::string& name);

/// MSB-first bit packer.
class BitWriter {
public:
    void push(bool bit);
    void push_bits(std::uint64_t value, unsigned nbits);  // most significant first
    std::size_t bit_count() const { return bit_count_; }
    std::vector<std::uint8_t> finish() &&;

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bit_count_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    bool read();
    std::uint64_t read_bits(unsigned nbits);
    std::size_t bits_consumed() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

/// Zero-run lengths of a bit column: one run per 1-bit, counting the zeros
/// before it, plus a final symbol for the zeros after the last 1. A column of
/// length n with no 1s is the single symbol {n}.
struct RunLengthStream {
    std::vector<std::uint64_t> runs;
};

RunLengthStream rle_extract(std::span<const std::uint8_t> bits01);
std::vector<std::uint8_t> rle_restore(const RunLengthStream& stream, std::size_t bit_count);

/// Encodes a symbol sequence with the selected backend. Framing: 1-byte coder
/// id, 4-byte little-endian symbol count, then coder-specific bytes.
std::vector<std::uint8_t> encode_symbols(Coder coder, std::span<const std::uint64_t> symbols);
std::vector<std::uint64_t> decode_symbols(std::span<const std::uint8_t> payload);

// --- integer range coder (arithmetic backend) ---

class RangeEncoder {
public:
    explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}
    void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
    void encode_raw(std::uint64_t value, unsigned nbits);
    void flush();

private:
    void shift_low();

    std::vector<std::uint8_t>& out_;
    std::uint64_t low_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint8_t cache_ = 0;
    std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
public:
    explicit RangeDecoder(std::span<const std::uint8_t> in);
    std::uint32_t threshold(std::uint32_t total);
    void update(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
    std::uint64_t decode_raw(unsigned nbits);

private:
    std::uint8_t next_byte();

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint32_t code_ = 0;
};

/// Adaptive frequency model over an open alphabet of 64-bit symbols. Unseen
/// symbols are escape-coded and their value written as 32 raw bits through
/// the coder. Counts bump by 32 and halve when the total reaches 2^16, so
/// encoder and decoder models evolve identically.
class AdaptiveModel {
public:
    AdaptiveModel();
    void encode(RangeEncoder& enc, std::uint64_t symbol);
    std::uint64_t decode(RangeDecoder& dec);

private:
    void bump(std::uint32_t index);
    void insert(std::uint64_t symbol);
    void halve();
    void fenwick_add(std::uint32_t index, std::int64_t delta);
    std::uint32_t prefix(std::uint32_t index) const;  // counts of indices < index
    std::uint32_t index_for_target(std::uint32_t target) const;

    static constexpr std::uint32_t kIncrement = 32;
    static constexpr std::uint32_t kMaxTotal = 1u << 16;

    std::vector<std::uint64_t> symbols_;   // index -> value; index 0 is the escape
    std::vector<std::uint32_t> counts_;
    std::vector<std::uint32_t> fenwick_;   // 1-based tree over counts_
    std::vector<std::pair<std::uint64_t, std::uint32_t>> lookup_;  // sorted by value
    std::uint32_t total_ = 0;
};

}  // namespace tucomp::entropy
