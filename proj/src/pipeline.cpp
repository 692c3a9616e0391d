#include "tucomp/pipeline.hpp"

#include <chrono>
#include <cmath>

#include <omp.h>

#include "tucomp/factor_codec.hpp"
#include "tucomp/kernels.hpp"

namespace tucomp::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Share of the total budget each factor may add on top of the core error.
constexpr double kFactorTermShare = 0.02;

template <class T>
CompressResult compress_impl(DenseTensor<T> a, container::Dtype source_dtype,
                             const Params& params) {
    const auto t_total = Clock::now();
    CompressResult res;
    res.original_bytes = a.size() * container::dtype_size(source_dtype);

    const std::size_t d = a.order();
    if (params.target_re && params.target_sse)
        throw Error("compress: relative-error and SSE targets are mutually exclusive");
    if (!params.target_re && !params.target_sse)
        throw Error("compress: no error target given");

    res.norm_sq = norm_sq(a);
    errormodel::ErrorBudget budget =
        params.target_re ? errormodel::make_budget_relative(*params.target_re, res.norm_sq,
                                                            params.rtmss)
                         : errormodel::make_budget_sse(*params.target_sse, params.rtmss);
    res.target_sse = budget.target_sse_total;

    // phase 1: rank truncation
    auto t0 = Clock::now();
    sthosvd::CompressOptions sopts;
    sopts.order = params.mode_order;
    sopts.backend = params.svd_backend;
    sthosvd::TuckerFactorization<T> fact = sthosvd::compress(a, budget.sthosvd_target(), sopts);
    budget.set_realized_truncation(fact.truncation_sse());
    res.times.sthosvd_ms = ms_since(t0);

    const std::uint64_t input_bytes = a.size() * sizeof(T);
    a = DenseTensor<T>();  // the factorization replaces the input from here on

    container::Header header;
    header.source_dtype = source_dtype;
    header.internal_float32 = std::is_same_v<T, float>;
    header.mode_sizes.assign(fact.factors.size(), 0);
    header.ranks.assign(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
        header.mode_sizes[i] = fact.factors[i].rows();
        header.ranks[i] = fact.factors[i].cols();
    }
    header.processing_order = fact.processing_order;
    header.method = params.method;
    header.coder = params.coder;
    header.split_planes = params.split_planes;
    header.simple_weights = params.simple_factor_weights;
    header.rtmss = params.rtmss;
    header.target_sse = budget.target_sse_total;
    header.norm_sq = res.norm_sq;
    header.truncation_sse = budget.realized_truncation_sse;
    res.ranks = header.ranks;

    // phase 2: core quantization
    t0 = Clock::now();
    ModePermutation storage =
        params.storage_order ? *params.storage_order
                             : vectorize::storage_order_heuristic(fact.core.shape());
    if (storage.size() != d || !is_permutation(storage))
        throw Error("compress: invalid storage order");
    header.storage_order = storage;

    DenseTensor<T> core_s = transpose(fact.core, storage);
    fact.core = DenseTensor<T>();
    const vectorize::OrderMap order = vectorize::OrderMap::build(params.method, core_s.shape());
    corecodec::QuantizedCore q = corecodec::quantize(core_s, order);
    const Shape core_shape = core_s.shape();
    core_s = DenseTensor<T>();
    res.times.quantize_ms = ms_since(t0);

    header.zero_flag = q.zero_flag;
    header.core_scale_exponent = q.scale_exponent;
    header.block_size =
        params.block_size ? params.block_size : corecodec::default_block_size(q.magnitudes.size());

    if (q.zero_flag) {
        res.estimate.truncation_sse = budget.realized_truncation_sse;
        header.core_quant_sse = 0;
        header.estimate_sse = res.estimate.total();
        res.container = container::write_container(header, {}, {});
        res.times.total_ms = ms_since(t_total);
        res.peak_alloc_estimate = input_bytes * 2;
        return res;
    }

    // original mode behind each storage axis
    std::vector<std::size_t> mode_of_axis(d);
    for (std::size_t axis = 0; axis < d; ++axis)
        mode_of_axis[axis] = fact.processing_order[storage[axis]];

    std::vector<std::vector<double>> slice_norms_mode(d);
    for (std::size_t axis = 0; axis < d; ++axis)
        slice_norms_mode[mode_of_axis[axis]] = std::move(q.slice_norms[axis]);

    // phase 3: plan the core bit placement
    t0 = Clock::now();
    corecodec::EncodeOptions eopts;
    eopts.coder = params.coder;
    eopts.workers = params.threads;
    eopts.block_size = header.block_size;
    eopts.split_planes = params.split_planes;
    corecodec::Encoder core_enc(q.magnitudes, eopts);
    const double target_int =
        std::ldexp(budget.core_quant_target_sse, 2 * q.scale_exponent);
    core_enc.plan(target_int);
    res.times.core_encode_ms = ms_since(t0);

    const auto dead_axis =
        corecodec::dead_slices(core_shape, order, core_enc.decoded_magnitudes());
    std::vector<std::vector<std::uint8_t>> dead_mode(d);
    for (std::size_t axis = 0; axis < d; ++axis)
        dead_mode[mode_of_axis[axis]] = dead_axis[axis];

    // phase 4: factors (Householder + bit planes), sign flips folded back
    t0 = Clock::now();
    factorcodec::FactorEncodeOptions fopts;
    fopts.coder = params.coder;
    fopts.workers = params.threads;
    fopts.simple_weights = params.simple_factor_weights;
    fopts.core_step_log2 = core_enc.last_plane() - q.scale_exponent;
    fopts.term_cap = kFactorTermShare * budget.target_sse_total / static_cast<double>(d);

    std::vector<container::FactorPayload> factor_payloads(d);
    std::vector<std::vector<std::int8_t>> flips(d);
    res.estimate.factor_terms.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        factorcodec::EncodedFactor<T> ef = factorcodec::encode_factor(
            fact.factors[i], dead_mode[i], slice_norms_mode[i], fopts);
        flips[i] = std::move(ef.flips);
        res.estimate.factor_terms[i] = ef.factor_term;
        factor_payloads[i].dead = std::move(ef.dead);
        factor_payloads[i].slice_norms = slice_norms_mode[i];
        factor_payloads[i].scale_exponent = ef.scale_exponent;
        factor_payloads[i].coeff_count = ef.coeff_count;
        factor_payloads[i].stream = std::move(ef.stream);
    }
    res.times.factor_encode_ms = ms_since(t0);

    // core signs after the per-column flips: the flipped factor columns are
    // compensated by flipping the matching core slices
    t0 = Clock::now();
    const auto strides = row_major_strides(core_shape);
    std::vector<std::uint8_t> signs = std::move(q.signs);
#pragma omp parallel for schedule(static) num_threads(params.threads)
    for (std::ptrdiff_t vv = 0; vv < static_cast<std::ptrdiff_t>(signs.size()); ++vv) {
        const std::uint64_t pos = order[static_cast<std::uint64_t>(vv)];
        std::uint8_t parity = 0;
        for (std::size_t axis = 0; axis < d; ++axis) {
            const std::size_t idx = (pos / strides[axis]) % core_shape[axis];
            if (flips[mode_of_axis[axis]][idx] < 0) parity ^= 1;
        }
        signs[vv] ^= parity;
    }
    corecodec::EncodedCore encoded_core = core_enc.finalize(signs);
    res.times.core_encode_ms += ms_since(t0);

    const double achieved_quant =
        std::ldexp(encoded_core.achieved_sse_int, -2 * q.scale_exponent);
    res.estimate.truncation_sse = budget.realized_truncation_sse;
    res.estimate.core_quantization_sse = achieved_quant;
    header.core_quant_sse = achieved_quant;
    header.estimate_sse = res.estimate.total();

    t0 = Clock::now();
    res.container = container::write_container(header, factor_payloads, encoded_core);
    res.times.serialize_ms = ms_since(t0);
    res.times.total_ms = ms_since(t_total);

    const std::uint64_t core_bytes = q.magnitudes.size() * 9;
    res.peak_alloc_estimate =
        2 * input_bytes + core_bytes + encoded_core.payload_bytes() + res.container.size();
    return res;
}

template <class T>
DenseTensor<T> decompress_impl(const container::Parsed& p, int threads) {
    const container::Header& h = p.header;
    const std::size_t d = h.order();

    Shape full_shape(h.mode_sizes.begin(), h.mode_sizes.end());
    if (h.zero_flag) return DenseTensor<T>(full_shape);

    // core shape as stored: processing order, then the storage permutation
    Shape core_p_shape(d), core_s_shape(d);
    for (std::size_t j = 0; j < d; ++j) core_p_shape[j] = h.ranks[h.processing_order[j]];
    for (std::size_t a = 0; a < d; ++a) core_s_shape[a] = core_p_shape[h.storage_order[a]];

    const vectorize::OrderMap order = vectorize::OrderMap::build(h.method, core_s_shape);
    if (order.size() != p.core.meta.count)
        throw Error("decompress: core size mismatch");

    corecodec::DecodedCore decoded = corecodec::decode(p.core.meta, p.core.payloads, threads);

    DenseTensor<T> core_s(core_s_shape);
    for (std::uint64_t v = 0; v < decoded.magnitudes.size(); ++v) {
        double value =
            std::ldexp(static_cast<double>(decoded.magnitudes[v]), -h.core_scale_exponent);
        if (decoded.signs[v]) value = -value;
        core_s[order[v]] = static_cast<T>(value);
    }

    sthosvd::TuckerFactorization<T> fact;
    fact.core = transpose(core_s, inverse_permutation(h.storage_order));
    fact.processing_order = h.processing_order;
    fact.per_step_truncation_sse.assign(d, 0.0);
    fact.factors.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const container::FactorView& f = p.factors[i];
        fact.factors[i] = factorcodec::decode_factor<T>(
            h.mode_sizes[i], h.ranks[i], f.dead, f.slice_norms, h.simple_weights,
            f.scale_exponent, f.coeff_count, f.meta, f.payloads, threads);
    }
    return sthosvd::reconstruct(fact);
}

}  // namespace

CompressResult compress(const container::SourceBuffer& src, const Params& params) {
    omp_set_num_threads(std::max(1, params.threads));
    if (params.internal_float32) {
        auto in = container::ingest<float>(src);
        auto res = compress_impl<float>(std::move(in.tensor), src.dtype, params);
        res.ingest_precision_loss = in.precision_loss;
        return res;
    }
    auto in = container::ingest<double>(src);
    auto res = compress_impl<double>(std::move(in.tensor), src.dtype, params);
    res.ingest_precision_loss = in.precision_loss;
    return res;
}

template <class T>
DenseTensor<T> decompress_tensor(std::span<const std::uint8_t> container_bytes, int threads) {
    omp_set_num_threads(std::max(1, threads));
    const container::Parsed p = container::read_container(container_bytes);
    if (p.header.internal_float32 != std::is_same_v<T, float>)
        throw Error("decompress: container precision does not match the requested type");
    return decompress_impl<T>(p, std::max(1, threads));
}

template DenseTensor<float> decompress_tensor(std::span<const std::uint8_t>, int);
template DenseTensor<double> decompress_tensor(std::span<const std::uint8_t>, int);

DecompressResult decompress(std::span<const std::uint8_t> container_bytes, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    omp_set_num_threads(std::max(1, threads));
    const container::Parsed p = container::read_container(container_bytes);

    DecompressResult out;
    out.dtype = p.header.source_dtype;
    out.shape.assign(p.header.mode_sizes.begin(), p.header.mode_sizes.end());
    if (p.header.internal_float32) {
        out.bytes = container::emit(decompress_impl<float>(p, std::max(1, threads)),
                                    p.header.source_dtype);
    } else {
        out.bytes = container::emit(decompress_impl<double>(p, std::max(1, threads)),
                                    p.header.source_dtype);
    }
    out.total_ms = ms_since(t0);
    return out;
}

}  // namespace tucomp::pipeline
