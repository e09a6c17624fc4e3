// metrics.hpp
//
// Camouflaged/salient object evaluation measures:
//   MAE      mean absolute error
//   S_alpha  structure measure (object-aware + region-aware SSIM, alpha = 0.5)
//   F_beta   F-measure at the adaptive threshold min(2 * mean, 1), beta^2 = 0.3
//   E_m      enhanced-alignment measure
//
// Predictions are soft maps with values in [0, 1]; binary masks convert via
// to_soft(). Ground truth is always binary.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "camoseg/core.hpp"

namespace camoseg
{

Heatmap to_soft(const BinaryMask& mask);

double mae(const Heatmap& pred, const BinaryMask& gt);
double mae(const BinaryMask& pred, const BinaryMask& gt);

double s_measure(const Heatmap& pred, const BinaryMask& gt, double alpha = 0.5);

double adaptive_f_measure(const Heatmap& pred, const BinaryMask& gt, double beta2 = 0.3);

/// Single-threshold E-measure of a binary prediction.
double e_measure(const BinaryMask& pred, const BinaryMask& gt);

/// E-measure averaged over the 256 thresholds k/255 applied to a soft map.
double mean_e_measure(const Heatmap& pred, const BinaryMask& gt);

struct MetricRow
{
    std::string id;
    double s_alpha = 0;
    double f_beta = 0;
    double mae = 0;
    double e_m = 0;
};

struct MetricReport
{
    std::vector<MetricRow> rows; // sorted by id
    MetricRow mean;              // id "mean"
};

struct EvaluationOptions
{
    /// Sweep E-measure thresholds on soft predictions instead of the single
    /// binary evaluation.
    bool sweep_e_measure = false;
};

MetricRow evaluate_pair(const std::string& id, const Heatmap& pred, const BinaryMask& gt,
                        const EvaluationOptions& options = {});

/// Pairs predictions with ground truths by identifier; throws
/// ContractViolation if the identifier sets differ or dimensions mismatch.
MetricReport evaluate_pairs(const std::vector<std::pair<std::string, Heatmap>>& preds,
                            const std::vector<std::pair<std::string, BinaryMask>>& gts,
                            const EvaluationOptions& options = {});

/// Recomputes `mean` from `rows`.
MetricRow mean_row(const std::vector<MetricRow>& rows);

/// Three-decimal rendering without the leading zero (".825").
std::string format_score(double value);

/// CSV with columns id,s_alpha,f_beta,mae,e_m at full precision plus a final
/// "mean" row.
std::string render_csv(const MetricReport& report);
MetricReport parse_csv(const std::string& text);

/// Aligned markdown table with three-decimal scores.
std::string render_markdown(const MetricReport& report, const std::string& title = {});

} // namespace camoseg
