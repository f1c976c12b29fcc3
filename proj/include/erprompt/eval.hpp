#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "erprompt/parse.hpp"

namespace erprompt {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Confusion counting plus the Unknown tally (Unknown judgments predict
/// NonMatch but are reported separately).
struct ConfusionOutcome {
    ConfusionCounts counts;
    std::size_t unknown = 0;

    bool operator==(const ConfusionOutcome&) const = default;
};

/// Precision/recall/F-measure; nullopt marks an undefined (0/0) quantity.
struct EvalMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f_measure;
};

struct ThresholdPoint {
    double threshold = 0.0;
    EvalMetrics metrics;
};

struct ThresholdSweepResult {
    double theta = 0.0;
    double best_f_measure = 0.0;
    std::vector<ThresholdPoint> curve; // ascending by threshold
};

struct AgreementMatrix {
    std::vector<std::string> patterns;
    // dup_fraction[i][j]: share of ground-truth duplicates that pattern i
    // labeled correctly while pattern j labeled incorrectly.
    std::vector<std::vector<double>> dup_fraction;
    std::vector<std::vector<double>> nondup_fraction;
};

struct PairedTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0; // two-sided
    std::size_t n = 0;
};

/// Ground-truth label keyed by the judgment's pair digest.
struct LabeledDigest {
    std::string digest;
    bool label = false;
};

/// Counts Match-vs-label outcomes; expects exactly one judgment per labeled
/// digest. Unknown decisions count as predicted NonMatch and tally in
/// `unknown`. Missing or surplus digests raise an alignment error.
ConfusionOutcome confusion(const std::vector<MatchJudgment>& judgments,
                           const std::vector<LabeledDigest>& labels);

/// P = tp/(tp+fp), R = tp/(tp+fn), FM = 2PR/(P+R); 0/0 stays undefined and
/// FM is undefined when either factor is or when P+R = 0.
EvalMetrics metrics(const ConfusionCounts& counts);

/// Harmonic mean of an already-known precision/recall pair.
std::optional<double> f_measure_of(std::optional<double> precision,
                                   std::optional<double> recall);

/// One scored pair for the threshold sweep.
struct ScoredPair {
    double similarity = 0.0; // must lie in [0,1]
    bool label = false;
};

/// Sweeps candidate thresholds {0} u {midpoints of distinct scores} u {1}
/// with the inclusive rule "Match iff similarity >= theta" and returns the
/// F-measure maximizer, ties broken toward the largest theta.
ThresholdSweepResult sweep_threshold(const std::vector<ScoredPair>& scored);

/// Judgments for one pattern, keyed by the pattern id. The vector order is
/// the row/column order of the resulting matrices.
using PatternJudgments = std::vector<std::pair<std::string, std::vector<MatchJudgment>>>;

/// Per-pattern correctness comparison over the shared pair set. Judgments
/// must carry Match/NonMatch decisions (threshold multi-sim runs first);
/// all patterns must cover exactly the labeled digests.
AgreementMatrix agreement_matrix(const PatternJudgments& per_pattern_judgments,
                                 const std::vector<LabeledDigest>& labels);

/// Classical paired Student's t-test over two equal-length 0/1 correctness
/// vectors; two-sided p. All-zero differences give t=0, p=1; zero-variance
/// nonzero-mean differences floor the p-value at 1e-300.
PairedTestResult paired_t_test(const std::vector<int>& a, const std::vector<int>& b);

/// Applies a threshold to similarity judgments: similarity >= theta becomes
/// Match, below becomes NonMatch, missing similarity stays Unknown.
std::vector<MatchJudgment> apply_threshold(const std::vector<MatchJudgment>& judgments,
                                           double theta);

/// Per-pair correctness (1 = prediction equals label) in `labels` order.
std::vector<int> correctness_vector(const std::vector<MatchJudgment>& judgments,
                                    const std::vector<LabeledDigest>& labels);

} // namespace erprompt
