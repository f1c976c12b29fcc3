#include "erprompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "erprompt/errors.hpp"
#include "erprompt/model.hpp"

namespace erprompt {

namespace {

std::unordered_map<std::string, const MatchJudgment*>
index_by_digest(const std::vector<MatchJudgment>& judgments,
                const std::vector<LabeledDigest>& labels) {
    std::unordered_map<std::string, const MatchJudgment*> index;
    index.reserve(judgments.size());
    for (const auto& judgment : judgments) {
        if (!index.emplace(judgment.pair_digest, &judgment).second) {
            throw AlignmentError("duplicate judgment for digest " + judgment.pair_digest);
        }
    }
    std::string missing;
    for (const auto& labeled : labels) {
        if (!index.count(labeled.digest)) {
            if (!missing.empty()) missing += ", ";
            missing += labeled.digest;
        }
    }
    if (!missing.empty()) {
        throw AlignmentError("no judgment for labeled digests: " + missing);
    }
    if (index.size() != labels.size()) {
        throw AlignmentError("judgments cover " + std::to_string(index.size()) +
                             " digests but " + std::to_string(labels.size()) +
                             " are labeled");
    }
    return index;
}

} // namespace

ConfusionOutcome confusion(const std::vector<MatchJudgment>& judgments,
                           const std::vector<LabeledDigest>& labels) {
    auto index = index_by_digest(judgments, labels);
    ConfusionOutcome outcome;
    for (const auto& labeled : labels) {
        const MatchJudgment& judgment = *index.at(labeled.digest);
        if (judgment.decision == Decision::Unknown) ++outcome.unknown;
        const bool predicted = judgment.decision == Decision::Match;
        if (predicted && labeled.label) ++outcome.counts.tp;
        else if (predicted && !labeled.label) ++outcome.counts.fp;
        else if (!predicted && labeled.label) ++outcome.counts.fn;
        else ++outcome.counts.tn;
    }
    return outcome;
}

EvalMetrics metrics(const ConfusionCounts& counts) {
    EvalMetrics out;
    if (counts.tp + counts.fp > 0) {
        out.precision = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    }
    if (counts.tp + counts.fn > 0) {
        out.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    }
    out.f_measure = f_measure_of(out.precision, out.recall);
    return out;
}

std::optional<double> f_measure_of(std::optional<double> precision,
                                   std::optional<double> recall) {
    if (!precision.has_value() || !recall.has_value()) return std::nullopt;
    if (*precision + *recall == 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / (*precision + *recall);
}

ThresholdSweepResult sweep_threshold(const std::vector<ScoredPair>& scored) {
    if (scored.empty()) throw ConfigError("threshold sweep needs at least one scored pair");
    std::size_t positives = 0;
    std::vector<double> scores;
    scores.reserve(scored.size());
    for (const auto& pair : scored) {
        if (!(pair.similarity >= 0.0 && pair.similarity <= 1.0)) {
            throw ConfigError("similarity " + canonical_double(pair.similarity) +
                              " outside [0,1]");
        }
        scores.push_back(pair.similarity);
        if (pair.label) ++positives;
    }
    if (positives == 0) {
        throw ConfigError("threshold sweep needs at least one positive label");
    }

    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> candidates;
    candidates.push_back(0.0);
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
        candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
    }
    candidates.push_back(1.0);
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    ThresholdSweepResult result;
    bool found = false;
    for (double theta : candidates) {
        ConfusionCounts counts;
        for (const auto& pair : scored) {
            const bool predicted = pair.similarity >= theta;
            if (predicted && pair.label) ++counts.tp;
            else if (predicted && !pair.label) ++counts.fp;
            else if (!predicted && pair.label) ++counts.fn;
            else ++counts.tn;
        }
        EvalMetrics point = metrics(counts);
        result.curve.push_back({theta, point});
        if (point.f_measure.has_value() &&
            (!found || *point.f_measure >= result.best_f_measure)) {
            // >= keeps the largest theta on ties.
            result.best_f_measure = *point.f_measure;
            result.theta = theta;
            found = true;
        }
    }
    if (!found) {
        throw ConfigError("threshold sweep found no threshold with a defined F-measure");
    }
    return result;
}

std::vector<int> correctness_vector(const std::vector<MatchJudgment>& judgments,
                                    const std::vector<LabeledDigest>& labels) {
    auto index = index_by_digest(judgments, labels);
    std::vector<int> correct;
    correct.reserve(labels.size());
    for (const auto& labeled : labels) {
        const bool predicted = index.at(labeled.digest)->decision == Decision::Match;
        correct.push_back(predicted == labeled.label ? 1 : 0);
    }
    return correct;
}

AgreementMatrix agreement_matrix(const PatternJudgments& per_pattern_judgments,
                                 const std::vector<LabeledDigest>& labels) {
    AgreementMatrix matrix;
    std::vector<std::vector<int>> correctness;
    for (const auto& [pattern, judgments] : per_pattern_judgments) {
        matrix.patterns.push_back(pattern);
        correctness.push_back(correctness_vector(judgments, labels));
    }

    std::size_t duplicates = 0;
    for (const auto& labeled : labels) {
        if (labeled.label) ++duplicates;
    }
    const std::size_t nonduplicates = labels.size() - duplicates;

    const std::size_t n = matrix.patterns.size();
    matrix.dup_fraction.assign(n, std::vector<double>(n, 0.0));
    matrix.nondup_fraction.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            std::size_t dup_hits = 0;
            std::size_t nondup_hits = 0;
            for (std::size_t k = 0; k < labels.size(); ++k) {
                if (correctness[i][k] == 1 && correctness[j][k] == 0) {
                    ++(labels[k].label ? dup_hits : nondup_hits);
                }
            }
            matrix.dup_fraction[i][j] =
                duplicates == 0 ? 0.0 : static_cast<double>(dup_hits) / duplicates;
            matrix.nondup_fraction[i][j] =
                nonduplicates == 0 ? 0.0 : static_cast<double>(nondup_hits) / nonduplicates;
        }
    }
    return matrix;
}

PairedTestResult paired_t_test(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw ConfigError("paired t-test needs equal-length vectors; got " +
                          std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw ConfigError("paired t-test needs at least 2 observations");
    }
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<double>(a[i] - b[i]);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double variance = ss / static_cast<double>(n - 1);

    PairedTestResult result;
    result.n = n;
    if (variance == 0.0) {
        if (mean == 0.0) {
            result.t_statistic = 0.0;
            result.p_value = 1.0;
        } else {
            // Degenerate zero-variance difference: report a huge finite t and
            // the documented p-value floor.
            result.t_statistic = std::copysign(1e300, mean);
            result.p_value = 1e-300;
        }
        return result;
    }
    result.t_statistic = mean / std::sqrt(variance / static_cast<double>(n));
    boost::math::students_t distribution(static_cast<double>(n - 1));
    result.p_value = 2.0 * boost::math::cdf(boost::math::complement(
                               distribution, std::abs(result.t_statistic)));
    result.p_value = std::clamp(result.p_value, 1e-300, 1.0);
    return result;
}

std::vector<MatchJudgment> apply_threshold(const std::vector<MatchJudgment>& judgments,
                                           double theta) {
    std::vector<MatchJudgment> out = judgments;
    for (auto& judgment : out) {
        if (!judgment.similarity.has_value()) {
            judgment.decision = Decision::Unknown;
            continue;
        }
        judgment.decision =
            *judgment.similarity >= theta ? Decision::Match : Decision::NonMatch;
    }
    return out;
}

} // namespace erprompt
