#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tucomp/container.hpp"
#include "tucomp/error_model.hpp"
#include "tucomp/sthosvd.hpp"

namespace tucomp::pipeline {

struct Params {
    std::optional<double> target_re;   // exactly one of these two must be set
    std::optional<double> target_sse;
    double rtmss = errormodel::kDefaultRtmss;
    int threads = 1;
    vectorize::Method method = vectorize::Method::lexicographic;
    std::optional<ModePermutation> storage_order;  // core axes, overrides the heuristic
    std::optional<ModePermutation> mode_order;     // processing order, overrides the heuristic
    entropy::Coder coder = entropy::Coder::arithmetic;
    bool split_planes = true;
    bool simple_factor_weights = false;
    std::uint64_t block_size = 0;  // 0 = codec default
    bool internal_float32 = false;
    sthosvd::SvdBackend svd_backend = sthosvd::SvdBackend::automatic;
};

struct PhaseTimes {
    double sthosvd_ms = 0;
    double quantize_ms = 0;
    double core_encode_ms = 0;
    double factor_encode_ms = 0;
    double serialize_ms = 0;
    double total_ms = 0;
};

struct CompressResult {
    std::vector<std::uint8_t> container;
    errormodel::ErrorEstimate estimate;
    double norm_sq = 0;
    double target_sse = 0;
    std::vector<std::uint64_t> ranks;
    PhaseTimes times;
    std::uint64_t peak_alloc_estimate = 0;
    std::uint64_t original_bytes = 0;
    bool ingest_precision_loss = false;

    double compression_factor() const {
        return container.empty() ? 0.0
                                 : static_cast<double>(original_bytes) /
                                       static_cast<double>(container.size());
    }
};

CompressResult compress(const container::SourceBuffer& src, const Params& params);

struct DecompressResult {
    std::vector<std::uint8_t> bytes;
    container::Dtype dtype = container::Dtype::float64;
    Shape shape;
    double total_ms = 0;
};

DecompressResult decompress(std::span<const std::uint8_t> container_bytes, int threads);

/// Decompresses into the internal floating representation (used for error
/// measurement and tests).
template <class T>
DenseTensor<T> decompress_tensor(std::span<const std::uint8_t> container_bytes, int threads);

}  // namespace tucomp::pipeline
