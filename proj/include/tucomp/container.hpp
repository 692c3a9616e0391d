#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tucomp/core_codec.hpp"
#include "tucomp/entropy.hpp"
#include "tucomp/tensor.hpp"
#include "tucomp/vectorize.hpp"

namespace tucomp::container {

enum class Dtype : std::uint8_t {
    int8 = 0,
    uint8 = 1,
    int16 = 2,
    uint16 = 3,
    int32 = 4,
    uint32 = 5,
    int64 = 6,
    uint64 = 7,
    float32 = 8,
    float64 = 9,
};

std::size_t dtype_size(Dtype t);
const char* dtype_name(Dtype t);
std::optional<Dtype> dtype_from_name(const std::string& name);

/// Raw input bytes plus the metadata needed to interpret them.
struct SourceBuffer {
    std::span<const std::uint8_t> bytes;
    Dtype dtype = Dtype::float64;
    Shape shape;
    std::size_t skip_bytes = 0;
};

template <class T>
struct IngestResult {
    DenseTensor<T> tensor;
    /// Set when integer magnitudes exceed the 53-bit double mantissa and the
    /// cast silently loses precision.
    bool precision_loss = false;
};

template <class T>
IngestResult<T> ingest(const SourceBuffer& src);

/// Casts back to the source type; integral types round to nearest and clamp
/// to the type's range.
template <class T>
std::vector<std::uint8_t> emit(const DenseTensor<T>& t, Dtype dtype);

inline constexpr std::uint8_t kFormatVersion = 1;

struct Header {
    Dtype source_dtype = Dtype::float64;
    bool internal_float32 = false;
    std::vector<std::uint64_t> mode_sizes;
    std::vector<std::uint64_t> ranks;
    ModePermutation processing_order;
    ModePermutation storage_order;  // permutation of the core's axes
    vectorize::Method method = vectorize::Method::lexicographic;
    entropy::Coder coder = entropy::Coder::arithmetic;
    bool zero_flag = false;
    bool split_planes = true;
    bool simple_weights = false;
    std::int32_t core_scale_exponent = 0;
    std::uint64_t block_size = 0;
    double rtmss = 0.5;
    double target_sse = 0.0;
    double norm_sq = 0.0;
    double truncation_sse = 0.0;
    double core_quant_sse = 0.0;
    double estimate_sse = 0.0;

    std::size_t order() const { return mode_sizes.size(); }
    std::uint64_t element_count() const;
};

struct FactorPayload {
    std::vector<std::uint8_t> dead;
    std::vector<double> slice_norms;
    std::int32_t scale_exponent = 0;
    std::uint64_t coeff_count = 0;
    corecodec::EncodedCore stream;
};

std::vector<std::uint8_t> write_container(const Header& header,
                                          const std::vector<FactorPayload>& factors,
                                          const corecodec::EncodedCore& core);

/// Parsed view of a container; payload spans point into the input buffer,
/// which must stay alive while the view is used.
struct FactorView {
    std::vector<std::uint8_t> dead;
    std::vector<double> slice_norms;
    std::int32_t scale_exponent = 0;
    std::uint64_t coeff_count = 0;
    corecodec::CoreMeta meta;
    std::vector<std::vector<std::span<const std::uint8_t>>> payloads;
};

struct CoreView {
    corecodec::CoreMeta meta;
    std::vector<std::vector<std::span<const std::uint8_t>>> payloads;
};

struct Parsed {
    Header header;
    std::vector<FactorView> factors;
    CoreView core;
};

Parsed read_container(std::span<const std::uint8_t> bytes);

}  // namespace tucomp::container
