#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erprompt/client.hpp"
#include "erprompt/eval.hpp"

namespace erprompt {

/// Everything known about one completed pattern run on one dataset.
struct PatternRun {
    std::string pattern_id;
    std::vector<MatchJudgment> judgments; // aligned with labels by digest
    TokenUsage usage;                     // summed over all calls
    double cost_usd = 0.0;
};

/// One row of the per-pattern results table.
struct PatternReportRow {
    std::string pattern_id;
    ConfusionCounts confusion;
    std::size_t unknown = 0;
    double unknown_rate = 0.0;
    EvalMetrics metrics;
    TokenUsage usage;
    double cost_usd = 0.0;
    // multi-sim only: swept threshold and the full curve.
    std::optional<double> theta;
    std::optional<std::vector<ThresholdPoint>> curve;
    std::size_t scored_pairs = 0;  // pairs with a parsed similarity
};

struct PairwisePValue {
    std::string pattern_a;
    std::string pattern_b;
    double t_statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// The assembled evaluation report for one dataset.
struct EvalReport {
    std::string dataset;
    std::size_t pairs = 0;
    std::size_t positives = 0;
    std::vector<PatternReportRow> rows;
    std::optional<AgreementMatrix> agreement;   // >= 2 patterns only
    std::vector<PairwisePValue> p_values;       // >= 2 patterns only
    double total_cost_usd = 0.0;
};

/// Computes metrics, threshold sweeps, agreement matrices and paired t-tests
/// for a set of completed pattern runs sharing one labeled pair set.
EvalReport build_report(const std::string& dataset,
                        const std::vector<PatternRun>& runs,
                        const std::vector<LabeledDigest>& labels);

/// Deterministic renderings of the report. The JSON document carries full
/// precision; the human tables round to 2 decimals.
std::string report_json(const EvalReport& report);
std::string report_markdown(const EvalReport& report);
std::string report_csv(const EvalReport& report);
std::string agreement_csv(const EvalReport& report);
std::string pvalues_csv(const EvalReport& report);

} // namespace erprompt
