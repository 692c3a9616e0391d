// Command-line front end: compress, decompress, inspect, and parameter sweeps.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tucomp/pipeline.hpp"

namespace {

using namespace tucomp;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write to " + path + " failed");
}

Shape parse_shape(const std::string& s) {
    Shape shape;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) shape.push_back(std::stoull(item));
    if (shape.empty()) throw Error("empty shape");
    return shape;
}

ModePermutation parse_order(const std::string& s) {
    ModePermutation p;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::size_t v = std::stoull(item);
        if (v == 0) throw Error("mode orders are 1-based");
        p.push_back(v - 1);
    }
    return p;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> g;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) g.push_back(std::stod(item));
    return g;
}

struct CommonFlags {
    std::string input, output;
    std::string shape_str, dtype_str = "float64";
    double target_re = -1, target_sse = -1;
    double rtmss = errormodel::kDefaultRtmss;
    int threads = 1;
    std::string vectorization = "lex", coder = "ac";
    std::string storage_order, mode_order;
    std::size_t skip_bytes = 0;
    std::uint64_t block_size = 0;
    bool no_split = false, simple_weights = false, internal_f32 = false;
};

pipeline::Params to_params(const CommonFlags& f) {
    pipeline::Params p;
    if (f.target_re >= 0) {
        if (f.target_re == 0)
            throw Error("--target-re 0 requests lossless output; this is a lossy "
                        "compressor, pick a small positive target instead");
        p.target_re = f.target_re;
    }
    if (f.target_sse >= 0) p.target_sse = f.target_sse;
    p.rtmss = f.rtmss;
    p.threads = f.threads;
    auto m = vectorize::method_from_name(f.vectorization);
    if (!m) throw Error("unknown vectorization method " + f.vectorization);
    p.method = *m;
    auto c = entropy::coder_from_name(f.coder);
    if (!c) throw Error("unknown coder " + f.coder);
    p.coder = *c;
    if (!f.storage_order.empty()) p.storage_order = parse_order(f.storage_order);
    if (!f.mode_order.empty()) p.mode_order = parse_order(f.mode_order);
    p.split_planes = !f.no_split;
    p.simple_factor_weights = f.simple_weights;
    p.block_size = f.block_size;
    p.internal_float32 = f.internal_f32;
    return p;
}

container::SourceBuffer make_source(const CommonFlags& f,
                                    std::span<const std::uint8_t> bytes) {
    container::SourceBuffer src;
    src.bytes = bytes;
    auto t = container::dtype_from_name(f.dtype_str);
    if (!t) throw Error("unknown dtype " + f.dtype_str);
    src.dtype = *t;
    src.shape = parse_shape(f.shape_str);
    src.skip_bytes = f.skip_bytes;
    return src;
}

struct Measured {
    double achieved_sse = 0;
    double achieved_re = 0;
    double decomp_ms = 0;
};

Measured measure_error(const container::SourceBuffer& src, const pipeline::Params& params,
                       std::span<const std::uint8_t> cont, double norm_sq) {
    Measured m;
    if (params.internal_float32) {
        auto original = container::ingest<float>(src);
        auto recon = pipeline::decompress_tensor<float>(cont, params.threads);
        m.achieved_sse = sse_between(original.tensor, recon);
    } else {
        auto original = container::ingest<double>(src);
        auto recon = pipeline::decompress_tensor<double>(cont, params.threads);
        m.achieved_sse = sse_between(original.tensor, recon);
    }
    m.achieved_re = norm_sq > 0 ? std::sqrt(m.achieved_sse / norm_sq) : 0.0;
    return m;
}

void print_report(const pipeline::CompressResult& res, const Measured& m, bool machine) {
    const double est_re =
        res.norm_sq > 0 ? std::sqrt(res.estimate.total() / res.norm_sq) : 0.0;
    std::cout << "compressed size:     " << res.container.size() << " bytes\n"
              << "compression factor:  " << res.compression_factor() << "\n"
              << "achieved rel. error: " << m.achieved_re << " (measured)\n"
              << "achieved SSE:        " << m.achieved_sse << "\n"
              << "estimated rel. error:" << est_re << " (error model)\n"
              << "estimated SSE:       " << res.estimate.total() << "\n"
              << "  truncation SSE:    " << res.estimate.truncation_sse << "\n"
              << "  core quant SSE:    " << res.estimate.core_quantization_sse << "\n";
    double fsum = 0;
    for (double f : res.estimate.factor_terms) fsum += f;
    std::cout << "  factor terms SSE:  " << fsum << "\n"
              << "ranks:              ";
    for (auto r : res.ranks) std::cout << " " << r;
    std::cout << "\n"
              << "times (ms): sthosvd " << res.times.sthosvd_ms << ", quantize "
              << res.times.quantize_ms << ", core encode " << res.times.core_encode_ms
              << ", factors " << res.times.factor_encode_ms << ", serialize "
              << res.times.serialize_ms << ", total " << res.times.total_ms << "\n"
              << "peak alloc estimate: " << res.peak_alloc_estimate << " bytes\n";
    if (res.ingest_precision_loss)
        std::cout << "warning: 64-bit integer input exceeds the 53-bit double mantissa; "
                     "values were rounded during ingest\n";
    if (machine) {
        std::cout << "report.bytes " << res.container.size() << "\n"
                  << "report.factor " << res.compression_factor() << "\n"
                  << "report.achieved_re " << m.achieved_re << "\n"
                  << "report.achieved_sse " << m.achieved_sse << "\n"
                  << "report.estimate_sse " << res.estimate.total() << "\n"
                  << "report.comp_ms " << res.times.total_ms << "\n";
    }
}

int cmd_compress(const CommonFlags& flags, bool machine, bool no_verify) {
    const auto bytes = read_file(flags.input);
    const auto src = make_source(flags, bytes);
    const auto params = to_params(flags);
    auto res = pipeline::compress(src, params);
    Measured m;
    if (!no_verify) m = measure_error(src, params, res.container, res.norm_sq);
    write_file(flags.output, res.container);
    print_report(res, m, machine);
    return 0;
}

int cmd_decompress(const std::string& input, const std::string& output, int threads) {
    const auto bytes = read_file(input);
    auto res = pipeline::decompress(bytes, threads);
    write_file(output, res.bytes);
    std::cout << "wrote " << res.bytes.size() << " bytes ("
              << container::dtype_name(res.dtype) << ", shape";
    for (auto s : res.shape) std::cout << " " << s;
    std::cout << ") in " << res.total_ms << " ms\n";
    return 0;
}

int cmd_info(const std::string& input) {
    const auto bytes = read_file(input);
    const auto p = container::read_container(bytes);
    const auto& h = p.header;
    std::cout << "format version:  " << int(container::kFormatVersion) << "\n"
              << "source dtype:    " << container::dtype_name(h.source_dtype) << "\n"
              << "internal:        " << (h.internal_float32 ? "float32" : "float64") << "\n"
              << "order:           " << h.order() << "\n";
    std::cout << "mode sizes:     ";
    for (auto s : h.mode_sizes) std::cout << " " << s;
    std::cout << "\nranks:          ";
    for (auto r : h.ranks) std::cout << " " << r;
    std::cout << "\nprocessing order:";
    for (auto v : h.processing_order) std::cout << " " << v + 1;
    std::cout << "\nstorage order:   ";
    for (auto v : h.storage_order) std::cout << " " << v + 1;
    std::cout << "\nvectorization:   " << vectorize::method_name(h.method) << "\n"
              << "entropy coder:   " << entropy::coder_name(h.coder) << "\n"
              << "block size:      " << h.block_size << "\n"
              << "scale exponent:  " << h.core_scale_exponent << "\n"
              << "rtmss:           " << h.rtmss << "\n"
              << "split planes:    " << (h.split_planes ? "yes" : "no") << "\n"
              << "factor weights:  " << (h.simple_weights ? "slice-norm" : "alpha") << "\n";
    if (h.zero_flag) std::cout << "content:         constant zero\n";
    const double recorded_re =
        h.norm_sq > 0 ? std::sqrt(h.estimate_sse / h.norm_sq) : 0.0;
    std::cout << "recorded error:  " << recorded_re << " relative (estimate; recorded)\n"
              << "compressed size: " << bytes.size() << " bytes\n";
    const std::uint64_t original =
        h.element_count() * container::dtype_size(h.source_dtype);
    std::cout << "original size:   " << original << " bytes\n"
              << "factor:          " << double(original) / double(bytes.size()) << "\n";
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& re_grid_str,
              const std::string& rtmss_grid_str) {
    const auto bytes = read_file(flags.input);
    const auto src = make_source(flags, bytes);
    const auto re_grid = parse_grid(re_grid_str);
    std::vector<double> rtmss_grid =
        rtmss_grid_str.empty() ? std::vector<double>{flags.rtmss} : parse_grid(rtmss_grid_str);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!flags.output.empty()) {
        file.open(flags.output);
        if (!file) throw Error("cannot open " + flags.output + " for writing");
        out = &file;
    }
    *out << "target_re,achieved_re,factor,rtmss,comp_ms,decomp_ms\n";
    for (const double rtmss : rtmss_grid) {
        for (const double re : re_grid) {
            CommonFlags cell = flags;
            cell.target_re = re;
            cell.target_sse = -1;
            cell.rtmss = rtmss;
            try {
                const auto params = to_params(cell);
                auto res = pipeline::compress(src, params);
                auto t0 = std::chrono::steady_clock::now();
                auto recon = pipeline::decompress(res.container, params.threads);
                const double decomp_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              t0)
                        .count();
                auto m = measure_error(src, params, res.container, res.norm_sq);
                *out << re << "," << m.achieved_re << "," << res.compression_factor() << ","
                     << rtmss << "," << res.times.total_ms << "," << decomp_ms << "\n";
            } catch (const std::exception& e) {
                std::cerr << "sweep cell re=" << re << " rtmss=" << rtmss
                          << " failed: " << e.what() << "\n";
                *out << re << ",nan,nan," << rtmss << ",nan,nan\n";
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tucker-based lossy compressor for dense multidimensional arrays"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool machine = false, no_verify = false;
    std::string re_grid, rtmss_grid;

    auto add_input_flags = [&](CLI::App* cmd) {
        cmd->add_option("-i,--input", flags.input, "input data file")->required();
        cmd->add_option("--shape", flags.shape_str, "comma-separated mode sizes")->required();
        cmd->add_option("--dtype", flags.dtype_str,
                        "int8|uint8|int16|uint16|int32|uint32|int64|uint64|float32|float64");
        cmd->add_option("--skip-bytes", flags.skip_bytes, "header bytes to ignore");
        cmd->add_option("--rtmss", flags.rtmss, "rank truncation share of the SSE budget");
        cmd->add_option("--threads", flags.threads, "worker threads");
        cmd->add_option("--vectorization", flags.vectorization, "lex|zigzag|zorder");
        cmd->add_option("--storage-order", flags.storage_order,
                        "core storage order, 1-based, e.g. 3,1,2");
        cmd->add_option("--mode-order", flags.mode_order, "processing order, 1-based");
        cmd->add_option("--coder", flags.coder, "ac|rans");
        cmd->add_option("--block-size", flags.block_size, "coefficients per encoder block");
        cmd->add_flag("--no-split-planes", flags.no_split,
                      "disable split truncation on the last bit plane");
        cmd->add_flag("--simple-factor-weights", flags.simple_weights,
                      "scale factor coefficients by slice norms only");
        cmd->add_flag("--internal-float32", flags.internal_f32,
                      "use 32-bit internal arithmetic");
    };

    auto* comp = app.add_subcommand("compress", "compress a raw tensor file");
    add_input_flags(comp);
    comp->add_option("-o,--output", flags.output, "output container")->required();
    comp->add_option("--target-re", flags.target_re, "target relative error");
    comp->add_option("--target-sse", flags.target_sse, "target sum of squared errors");
    comp->add_flag("--machine", machine, "also print machine-readable report lines");
    comp->add_flag("--no-verify", no_verify, "skip the decompress-and-measure pass");

    std::string d_in, d_out;
    int d_threads = 1;
    auto* dec = app.add_subcommand("decompress", "decompress a container");
    dec->add_option("-i,--input", d_in, "container file")->required();
    dec->add_option("-o,--output", d_out, "output data file")->required();
    dec->add_option("--threads", d_threads, "worker threads");

    std::string info_in;
    auto* info = app.add_subcommand("info", "print container metadata");
    info->add_option("-i,--input", info_in, "container file")->required();

    auto* sweep = app.add_subcommand("sweep", "compress across an error/rtmss grid");
    add_input_flags(sweep);
    sweep->add_option("-o,--output", flags.output, "CSV output (default stdout)");
    sweep->add_option("--target-re-grid", re_grid, "comma-separated relative errors")
        ->required();
    sweep->add_option("--rtmss-grid", rtmss_grid, "comma-separated rtmss values");

    CLI11_PARSE(app, argc, argv);

    try {
        if (comp->parsed()) {
            if (flags.target_re < 0 && flags.target_sse < 0)
                throw tucomp::Error("one of --target-re / --target-sse is required");
            if (flags.target_re >= 0 && flags.target_sse >= 0)
                throw tucomp::Error("--target-re and --target-sse are mutually exclusive");
            return cmd_compress(flags, machine, no_verify);
        }
        if (dec->parsed()) return cmd_decompress(d_in, d_out, d_threads);
        if (info->parsed()) return cmd_info(info_in);
        if (sweep->parsed()) return cmd_sweep(flags, re_grid, rtmss_grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
