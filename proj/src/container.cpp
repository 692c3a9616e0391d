#include "tucomp/container.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace tucomp::container {

std::size_t dtype_size(Dtype t) {
    switch (t) {
        case Dtype::int8:
        case Dtype::uint8: return 1;
        case Dtype::int16:
        case Dtype::uint16: return 2;
        case Dtype::int32:
        case Dtype::uint32:
        case Dtype::float32: return 4;
        case Dtype::int64:
        case Dtype::uint64:
        case Dtype::float64: return 8;
    }
    throw Error("container: unknown dtype");
}

const char* dtype_name(Dtype t) {
    switch (t) {
        case Dtype::int8: return "int8";
        case Dtype::uint8: return "uint8";
        case Dtype::int16: return "int16";
        case Dtype::uint16: return "uint16";
        case Dtype::int32: return "int32";
        case Dtype::uint32: return "uint32";
        case Dtype::int64: return "int64";
        case Dtype::uint64: return "uint64";
        case Dtype::float32: return "float32";
        case Dtype::float64: return "float64";
    }
    return "?";
}

std::optional<Dtype> dtype_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(Dtype::float64); ++i) {
        const Dtype t = static_cast<Dtype>(i);
        if (name == dtype_name(t)) return t;
    }
    return std::nullopt;
}

namespace {

template <class Native, class T>
void cast_in(std::span<const std::uint8_t> raw, std::vector<T>& out, bool& precision_loss) {
    const std::size_t n = raw.size() / sizeof(Native);
    out.resize(n);
    const Native* src = reinterpret_cast<const Native*>(raw.data());
    for (std::size_t i = 0; i < n; ++i) {
        Native v;
        std::memcpy(&v, src + i, sizeof(Native));
        out[i] = static_cast<T>(v);
        if constexpr (std::is_integral_v<Native> && sizeof(Native) == 8) {
            const auto mag = static_cast<std::uint64_t>(v < 0 ? -(v + 1) : v);
            if (mag > (std::uint64_t{1} << 53)) precision_loss = true;
        }
    }
}

}  // namespace

template <class T>
IngestResult<T> ingest(const SourceBuffer& src) {
    const std::uint64_t n = shape_numel(src.shape);
    const std::size_t expect = src.skip_bytes + n * dtype_size(src.dtype);
    if (src.bytes.size() != expect)
        throw Error("ingest: buffer holds " + std::to_string(src.bytes.size()) +
                    " bytes, expected " + std::to_string(expect));

    IngestResult<T> out;
    std::vector<T> elems;
    const auto raw = src.bytes.subspan(src.skip_bytes);
    switch (src.dtype) {
        case Dtype::int8: cast_in<std::int8_t>(raw, elems, out.precision_loss); break;
        case Dtype::uint8: cast_in<std::uint8_t>(raw, elems, out.precision_loss); break;
        case Dtype::int16: cast_in<std::int16_t>(raw, elems, out.precision_loss); break;
        case Dtype::uint16: cast_in<std::uint16_t>(raw, elems, out.precision_loss); break;
        case Dtype::int32: cast_in<std::int32_t>(raw, elems, out.precision_loss); break;
        case Dtype::uint32: cast_in<std::uint32_t>(raw, elems, out.precision_loss); break;
        case Dtype::int64: cast_in<std::int64_t>(raw, elems, out.precision_loss); break;
        case Dtype::uint64: cast_in<std::uint64_t>(raw, elems, out.precision_loss); break;
        case Dtype::float32: cast_in<float>(raw, elems, out.precision_loss); break;
        case Dtype::float64: cast_in<double>(raw, elems, out.precision_loss); break;
    }
    out.tensor = DenseTensor<T>(src.shape, std::move(elems));
    return out;
}

namespace {

template <class Native, class T>
std::vector<std::uint8_t> cast_out(const DenseTensor<T>& t) {
    std::vector<std::uint8_t> bytes(t.size() * sizeof(Native));
    Native* dst = reinterpret_cast<Native*>(bytes.data());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = static_cast<double>(t[i]);
        Native out;
        if constexpr (std::is_integral_v<Native>) {
            const double lo = static_cast<double>(std::numeric_limits<Native>::min());
            const double hi = static_cast<double>(std::numeric_limits<Native>::max());
            double r = std::nearbyint(v);
            if (r <= lo)
                out = std::numeric_limits<Native>::min();
            else if (r >= hi)
                out = std::numeric_limits<Native>::max();
            else
                out = static_cast<Native>(r);
        } else {
            out = static_cast<Native>(v);
        }
        std::memcpy(dst + i, &out, sizeof(Native));
    }
    return bytes;
}

}  // namespace

template <class T>
std::vector<std::uint8_t> emit(const DenseTensor<T>& t, Dtype dtype) {
    switch (dtype) {
        case Dtype::int8: return cast_out<std::int8_t>(t);
        case Dtype::uint8: return cast_out<std::uint8_t>(t);
        case Dtype::int16: return cast_out<std::int16_t>(t);
        case Dtype::uint16: return cast_out<std::uint16_t>(t);
        case Dtype::int32: return cast_out<std::int32_t>(t);
        case Dtype::uint32: return cast_out<std::uint32_t>(t);
        case Dtype::int64: return cast_out<std::int64_t>(t);
        case Dtype::uint64: return cast_out<std::uint64_t>(t);
        case Dtype::float32: return cast_out<float>(t);
        case Dtype::float64: return cast_out<double>(t);
    }
    throw Error("emit: unknown dtype");
}

template IngestResult<float> ingest(const SourceBuffer&);
template IngestResult<double> ingest(const SourceBuffer&);
template std::vector<std::uint8_t> emit(const DenseTensor<float>&, Dtype);
template std::vector<std::uint8_t> emit(const DenseTensor<double>&, Dtype);

std::uint64_t Header::element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t s : mode_sizes) n *= s;
    return n;
}

namespace {

constexpr char kMagic[4] = {'T', 'K', 'C', '1'};

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void raw(std::span<const std::uint8_t> data) {
        bytes_.insert(bytes_.end(), data.begin(), data.end());
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    std::size_t size() const { return bytes_.size(); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string section)
        : bytes_(bytes), section_(std::move(section)) {}

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size())
            throw Error("container: truncated " + section_ + " section");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string section_;
};

void write_stream(Writer& w, std::uint64_t count, const corecodec::EncodedCore& enc) {
    w.u64(count);
    w.u64(enc.block_size);
    w.u8(static_cast<std::uint8_t>(enc.last_plane));
    w.u32(static_cast<std::uint32_t>(enc.stops.size()));
    for (const auto& s : enc.stops) {
        w.u64(s.leading);
        w.u64(s.trailing);
    }
    w.u32(static_cast<std::uint32_t>(enc.payloads.size()));
    for (const auto& plane : enc.payloads) {
        for (const auto& block : plane) {
            w.u32(static_cast<std::uint32_t>(block.size()));
            w.raw(block);
        }
    }
}

void read_stream(Reader& r, std::uint64_t& count, corecodec::CoreMeta& meta,
                 std::vector<std::vector<std::span<const std::uint8_t>>>& payloads) {
    count = r.u64();
    meta.count = count;
    meta.block_size = r.u64();
    meta.last_plane = r.u8();
    const std::uint32_t n_blocks = r.u32();
    meta.stops.resize(n_blocks);
    for (auto& s : meta.stops) {
        s.leading = r.u64();
        s.trailing = r.u64();
    }
    const std::uint32_t n_planes = r.u32();
    if (n_planes > 64) throw Error("container: implausible plane count");
    payloads.assign(n_planes, {});
    for (auto& plane : payloads) {
        plane.resize(n_blocks);
        for (auto& block : plane) block = r.raw(r.u32());
    }
}

}  // namespace

std::vector<std::uint8_t> write_container(const Header& header,
                                          const std::vector<FactorPayload>& factors,
                                          const corecodec::EncodedCore& core) {
    const std::size_t d = header.order();
    if (!header.zero_flag && factors.size() != d)
        throw Error("container: factor payload count mismatch");

    Writer w;
    w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u8(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(header.source_dtype));
    w.u8(header.internal_float32 ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(d));
    w.u8(static_cast<std::uint8_t>(header.coder));
    w.u8(static_cast<std::uint8_t>(header.method));
    std::uint8_t flags = 0;
    if (header.zero_flag) flags |= 1;
    if (header.split_planes) flags |= 2;
    if (header.simple_weights) flags |= 4;
    w.u8(flags);
    w.u8(0);
    for (std::uint64_t s : header.mode_sizes) w.u64(s);
    for (std::uint64_t rk : header.ranks) w.u64(rk);
    for (std::size_t i = 0; i < d; ++i) w.u8(static_cast<std::uint8_t>(header.processing_order[i]));
    for (std::size_t i = 0; i < d; ++i) w.u8(static_cast<std::uint8_t>(header.storage_order[i]));
    w.i32(header.core_scale_exponent);
    w.u64(header.block_size);
    w.f64(header.rtmss);
    w.f64(header.target_sse);
    w.f64(header.norm_sq);
    w.f64(header.truncation_sse);
    w.f64(header.core_quant_sse);
    w.f64(header.estimate_sse);

    if (!header.zero_flag) {
        for (std::size_t i = 0; i < d; ++i) {
            const FactorPayload& f = factors[i];
            Writer fw;
            const std::size_t r = f.slice_norms.size();
            for (std::size_t j = 0; j < r; j += 8) {
                std::uint8_t b = 0;
                for (std::size_t k = 0; k < 8 && j + k < r; ++k)
                    if (f.dead[j + k]) b |= static_cast<std::uint8_t>(1u << k);
                fw.u8(b);
            }
            for (double s : f.slice_norms) fw.f64(s);
            fw.i32(f.scale_exponent);
            fw.u64(f.coeff_count);
            write_stream(fw, f.coeff_count, f.stream);
            const auto bytes = fw.take();
            w.u64(bytes.size());
            w.raw(bytes);
        }
        Writer cw;
        write_stream(cw, [&] {
            std::uint64_t n = 1;
            for (std::uint64_t rk : header.ranks) n *= rk;
            return n;
        }(), core);
        const auto bytes = cw.take();
        w.u64(bytes.size());
        w.raw(bytes);
    }
    return w.take();
}

Parsed read_container(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "header");
    const auto magic = r.raw(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error("container: bad magic");
    const std::uint8_t version = r.u8();
    if (version != kFormatVersion)
        throw Error("container: unsupported format version " + std::to_string(version));

    Parsed p;
    Header& h = p.header;
    h.source_dtype = static_cast<Dtype>(r.u8());
    if (static_cast<int>(h.source_dtype) > static_cast<int>(Dtype::float64))
        throw Error("container: unknown source dtype");
    h.internal_float32 = r.u8() != 0;
    const std::size_t d = r.u8();
    if (d == 0) throw Error("container: zero tensor order");
    const std::uint8_t coder = r.u8();
    if (coder > 1) throw Error("container: unknown entropy coder id");
    h.coder = static_cast<entropy::Coder>(coder);
    const std::uint8_t method = r.u8();
    if (method > 2) throw Error("container: unknown vectorization method id");
    h.method = static_cast<vectorize::Method>(method);
    const std::uint8_t flags = r.u8();
    h.zero_flag = flags & 1;
    h.split_planes = flags & 2;
    h.simple_weights = flags & 4;
    r.u8();  // reserved
    h.mode_sizes.resize(d);
    for (auto& s : h.mode_sizes) s = r.u64();
    h.ranks.resize(d);
    for (auto& rk : h.ranks) rk = r.u64();
    h.processing_order.resize(d);
    for (auto& v : h.processing_order) v = r.u8();
    h.storage_order.resize(d);
    for (auto& v : h.storage_order) v = r.u8();
    if (!is_permutation(h.processing_order) || !is_permutation(h.storage_order))
        throw Error("container: corrupt mode permutations");
    for (std::size_t i = 0; i < d; ++i) {
        if (h.mode_sizes[i] == 0 || h.ranks[i] == 0 || h.ranks[i] > h.mode_sizes[i])
            throw Error("container: corrupt mode sizes or ranks");
    }
    h.core_scale_exponent = r.i32();
    h.block_size = r.u64();
    h.rtmss = r.f64();
    h.target_sse = r.f64();
    h.norm_sq = r.f64();
    h.truncation_sse = r.f64();
    h.core_quant_sse = r.f64();
    h.estimate_sse = r.f64();

    if (h.zero_flag) return p;

    p.factors.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const std::uint64_t len = r.u64();
        Reader fr(r.raw(len), "factor " + std::to_string(i + 1));
        FactorView& f = p.factors[i];
        const std::size_t rk = h.ranks[i];
        f.dead.assign(rk, 0);
        for (std::size_t j = 0; j < rk; j += 8) {
            const std::uint8_t b = fr.u8();
            for (std::size_t k = 0; k < 8 && j + k < rk; ++k)
                f.dead[j + k] = (b >> k) & 1;
        }
        f.slice_norms.resize(rk);
        for (auto& s : f.slice_norms) s = fr.f64();
        f.scale_exponent = fr.i32();
        f.coeff_count = fr.u64();
        std::uint64_t count = 0;
        read_stream(fr, count, f.meta, f.payloads);
        if (count != f.coeff_count) throw Error("container: factor stream length mismatch");
    }
    {
        const std::uint64_t len = r.u64();
        Reader cr(r.raw(len), "core");
        std::uint64_t count = 0;
        read_stream(cr, count, p.core.meta, p.core.payloads);
        std::uint64_t expect = 1;
        for (std::uint64_t rk : h.ranks) expect *= rk;
        if (count != expect) throw Error("container: core length does not match ranks");
    }
    return p;
}

}  // namespace tucomp::container
