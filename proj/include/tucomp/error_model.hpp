#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tucomp::errormodel {

/// Splits the total SSE budget between rank truncation and core quantization.
struct ErrorBudget {
    double target_sse_total = 0.0;
    double rtmss = 0.5;
    double realized_truncation_sse = 0.0;
    double core_quant_target_sse = 0.0;

    double sthosvd_target() const { return rtmss * target_sse_total; }

    /// Records the realized truncation SSE; the remaining budget goes to the
    /// core quantizer (clamped at zero).
    void set_realized_truncation(double sse) {
        realized_truncation_sse = sse;
        core_quant_target_sse = target_sse_total - sse;
        if (core_quant_target_sse < 0) core_quant_target_sse = 0;
    }
};

inline constexpr double kDefaultRtmss = 0.5;

/// Builds a budget from either a relative-error target (converted through
/// ||a||^2) or a direct SSE target.
ErrorBudget make_budget_relative(double target_re, double norm_sq_a, double rtmss);
ErrorBudget make_budget_sse(double target_sse, double rtmss);

/// Decomposition of the predicted compression error: truncation, core
/// quantization, and one ||dU_i S_i||_F^2 term per mode.
struct ErrorEstimate {
    double truncation_sse = 0.0;
    double core_quantization_sse = 0.0;
    std::vector<double> factor_terms;

    double total() const {
        double t = truncation_sse + core_quantization_sse;
        for (double f : factor_terms) t += f;
        return t;
    }
};

double estimate_total_sse(const ErrorEstimate& e);

/// Sum of squares accumulated from the last element to the first. Meant for
/// sequences ordered large-to-small, where this beats forward accumulation.
double backward_sum_sse(std::span<const double> values);
double backward_sum_sse(std::span<const std::uint64_t> values);

/// Conservative bound on the rounding error of a running SSE that has been
/// updated `terms_processed` times since it was last computed exactly;
/// `reference_sse` is its value at that point.
double recalibration_margin(std::uint64_t terms_processed, double reference_sse);

/// Trigger threshold: recompute exactly once the margin exceeds this fraction
/// of the current running SSE.
inline constexpr double kRecalibrationTriggerShare = 0.1;

bool recalibration_due(std::uint64_t terms_processed, double reference_sse, double running_sse);

/// Exact quantization SSE of a core whose bit planes down to `plane` have
/// been encoded for every coefficient, with the midpoint correction applied
/// to significant coefficients. Accumulated backward.
double recalibrate_sse(std::span<const std::uint64_t> magnitudes, int plane);

}  // namespace tucomp::errormodel
