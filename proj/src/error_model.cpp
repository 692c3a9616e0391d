#include "tucomp/error_model.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "tucomp/tensor.hpp"  // Error

namespace tucomp::errormodel {

ErrorBudget make_budget_relative(double target_re, double norm_sq_a, double rtmss) {
    if (target_re < 0) throw Error("budget: negative relative-error target");
    return make_budget_sse(target_re * target_re * norm_sq_a, rtmss);
}

ErrorBudget make_budget_sse(double target_sse, double rtmss) {
    if (target_sse < 0) throw Error("budget: negative SSE target");
    if (rtmss < 0 || rtmss > 1) throw Error("budget: rtmss outside [0, 1]");
    ErrorBudget b;
    b.target_sse_total = target_sse;
    b.rtmss = rtmss;
    b.core_quant_target_sse = target_sse;
    return b;
}

double estimate_total_sse(const ErrorEstimate& e) { return e.total(); }

double backward_sum_sse(std::span<const double> values) {
    double s = 0.0;
    for (std::size_t i = values.size(); i-- > 0;) s += values[i] * values[i];
    return s;
}

double backward_sum_sse(std::span<const std::uint64_t> values) {
    double s = 0.0;
    for (std::size_t i = values.size(); i-- > 0;) {
        double v = static_cast<double>(values[i]);
        s += v * v;
    }
    return s;
}

double recalibration_margin(std::uint64_t terms_processed, double reference_sse) {
    constexpr double c = 4.0;
    return c * std::numeric_limits<double>::epsilon() *
           static_cast<double>(terms_processed) * reference_sse;
}

bool recalibration_due(std::uint64_t terms_processed, double reference_sse, double running_sse) {
    return recalibration_margin(terms_processed, reference_sse) >
           kRecalibrationTriggerShare * running_sse;
}

double recalibrate_sse(std::span<const std::uint64_t> magnitudes, int plane) {
    if (plane < 0 || plane > 64) throw Error("recalibrate: plane out of range");
    double s = 0.0;
    for (std::size_t i = magnitudes.size(); i-- > 0;) {
        const std::uint64_t m = magnitudes[i];
        double r;
        if (plane >= 64 || (m >> plane) == 0) {
            r = static_cast<double>(m);  // insignificant: decodes to zero
        } else if (plane == 0) {
            r = 0.0;  // fully encoded
        } else {
            const std::uint64_t low = m & ((std::uint64_t{1} << plane) - 1);
            const std::uint64_t half = std::uint64_t{1} << (plane - 1);
            r = static_cast<double>(low) - static_cast<double>(half);
        }
        s += r * r;
    }
    return s;
}

}  // namespace tucomp::errormodel
