#include "erprompt/report.hpp"

#include <cstdio>

#include <json.hpp>

#include "erprompt/errors.hpp"

namespace erprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string fixed_or_na(const std::optional<double>& value, int decimals = 2) {
    return value.has_value() ? fixed(*value, decimals) : "n/a";
}

ordered_json json_or_null(const std::optional<double>& value) {
    if (value.has_value()) return *value;
    return nullptr;
}

ordered_json metrics_json(const EvalMetrics& metrics) {
    ordered_json out = ordered_json::object();
    out["precision"] = json_or_null(metrics.precision);
    out["recall"] = json_or_null(metrics.recall);
    out["f_measure"] = json_or_null(metrics.f_measure);
    return out;
}

bool is_similarity_run(const PatternRun& run) {
    return run.pattern_id == "multi-sim";
}

} // namespace

EvalReport build_report(const std::string& dataset, const std::vector<PatternRun>& runs,
                        const std::vector<LabeledDigest>& labels) {
    if (runs.empty()) throw ConfigError("report needs at least one completed run");
    EvalReport report;
    report.dataset = dataset;
    report.pairs = labels.size();
    for (const auto& labeled : labels) {
        if (labeled.label) ++report.positives;
    }

    PatternJudgments decided;
    for (const auto& run : runs) {
        PatternReportRow row;
        row.pattern_id = run.pattern_id;
        row.usage = run.usage;
        row.cost_usd = run.cost_usd;
        report.total_cost_usd += run.cost_usd;

        std::vector<MatchJudgment> judged = run.judgments;
        if (is_similarity_run(run)) {
            std::unordered_map<std::string, bool> label_of;
            for (const auto& labeled : labels) label_of[labeled.digest] = labeled.label;
            std::vector<ScoredPair> scored;
            for (const auto& judgment : run.judgments) {
                if (!judgment.similarity.has_value()) continue;
                auto it = label_of.find(judgment.pair_digest);
                if (it == label_of.end()) {
                    throw AlignmentError("similarity judgment for unlabeled digest " +
                                         judgment.pair_digest);
                }
                scored.push_back({*judgment.similarity, it->second});
            }
            row.scored_pairs = scored.size();
            auto sweep = sweep_threshold(scored);
            row.theta = sweep.theta;
            row.curve = std::move(sweep.curve);
            judged = apply_threshold(run.judgments, sweep.theta);
        }

        auto outcome = confusion(judged, labels);
        row.confusion = outcome.counts;
        row.unknown = outcome.unknown;
        row.unknown_rate = labels.empty()
                               ? 0.0
                               : static_cast<double>(outcome.unknown) / labels.size();
        row.metrics = metrics(outcome.counts);
        report.rows.push_back(std::move(row));
        decided.emplace_back(run.pattern_id, std::move(judged));
    }

    if (runs.size() >= 2) {
        report.agreement = agreement_matrix(decided, labels);
        std::vector<std::vector<int>> correctness;
        correctness.reserve(decided.size());
        for (const auto& [pattern, judgments] : decided) {
            correctness.push_back(correctness_vector(judgments, labels));
        }
        for (std::size_t i = 0; i < decided.size(); ++i) {
            for (std::size_t j = i + 1; j < decided.size(); ++j) {
                auto test = paired_t_test(correctness[i], correctness[j]);
                report.p_values.push_back({decided[i].first, decided[j].first,
                                           test.t_statistic, test.p_value, test.n});
            }
        }
    }
    return report;
}

std::string report_json(const EvalReport& report) {
    ordered_json doc = ordered_json::object();
    doc["dataset"] = report.dataset;
    doc["pairs"] = report.pairs;
    doc["positives"] = report.positives;
    doc["total_cost_usd"] = report.total_cost_usd;

    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json entry = ordered_json::object();
        entry["pattern"] = row.pattern_id;
        entry["metrics"] = metrics_json(row.metrics);
        entry["confusion"] = {{"tp", row.confusion.tp},
                              {"fp", row.confusion.fp},
                              {"fn", row.confusion.fn},
                              {"tn", row.confusion.tn}};
        entry["unknown"] = row.unknown;
        entry["unknown_rate"] = row.unknown_rate;
        entry["prompt_tokens"] = row.usage.prompt_tokens;
        entry["completion_tokens"] = row.usage.completion_tokens;
        entry["cost_usd"] = row.cost_usd;
        if (row.theta.has_value()) {
            entry["theta"] = *row.theta;
            entry["scored_pairs"] = row.scored_pairs;
            ordered_json curve = ordered_json::array();
            for (const auto& point : *row.curve) {
                ordered_json item = ordered_json::object();
                item["threshold"] = point.threshold;
                item["precision"] = json_or_null(point.metrics.precision);
                item["recall"] = json_or_null(point.metrics.recall);
                item["f_measure"] = json_or_null(point.metrics.f_measure);
                curve.push_back(std::move(item));
            }
            entry["curve"] = std::move(curve);
        }
        rows.push_back(std::move(entry));
    }
    doc["patterns"] = std::move(rows);

    if (report.agreement.has_value()) {
        const auto& agreement = *report.agreement;
        ordered_json block = ordered_json::object();
        block["patterns"] = agreement.patterns;
        block["dup_fraction"] = agreement.dup_fraction;
        block["nondup_fraction"] = agreement.nondup_fraction;
        doc["agreement"] = std::move(block);
    }
    if (!report.p_values.empty()) {
        ordered_json tests = ordered_json::array();
        for (const auto& entry : report.p_values) {
            ordered_json item = ordered_json::object();
            item["a"] = entry.pattern_a;
            item["b"] = entry.pattern_b;
            item["t"] = entry.t_statistic;
            item["p"] = entry.p_value;
            item["n"] = entry.n;
            tests.push_back(std::move(item));
        }
        doc["paired_t_tests"] = std::move(tests);
    }
    return doc.dump(2) + "\n";
}

std::string report_markdown(const EvalReport& report) {
    std::string out;
    out += "# erprompt report: " + report.dataset + "\n\n";
    out += std::to_string(report.pairs) + " pairs (" + std::to_string(report.positives) +
           " positive). Total estimated cost: $" + fixed(report.total_cost_usd, 2) + "\n\n";
    out += "| Pattern | Precision | Recall | FM | Unknown | Prompt tok | Completion tok | Cost (USD) |\n";
    out += "|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
        out += "| " + row.pattern_id + " | " + fixed_or_na(row.metrics.precision) + " | " +
               fixed_or_na(row.metrics.recall) + " | " + fixed_or_na(row.metrics.f_measure) +
               " | " + std::to_string(row.unknown) + " | " +
               std::to_string(row.usage.prompt_tokens) + " | " +
               std::to_string(row.usage.completion_tokens) + " | " +
               fixed(row.cost_usd, 2) + " |\n";
    }
    for (const auto& row : report.rows) {
        if (row.theta.has_value()) {
            out += "\nThreshold for " + row.pattern_id + ": theta = " +
                   fixed(*row.theta, 4) + " (best FM " +
                   fixed_or_na(row.metrics.f_measure) + ", " +
                   std::to_string(row.scored_pairs) + " scored pairs). The threshold is "
                   "selected on the evaluation set itself, so this FM is optimistic by "
                   "construction.\n";
        }
    }

    if (report.agreement.has_value()) {
        const auto& agreement = *report.agreement;
        out += "\n## Agreement (duplicates/non-duplicates)\n\n";
        out += "Cell (row, column): fraction of ground-truth duplicates/non-duplicates the "
               "row pattern labeled correctly and the column pattern labeled incorrectly.\n\n";
        out += "| |";
        for (const auto& pattern : agreement.patterns) out += " " + pattern + " |";
        out += "\n|---|";
        for (std::size_t i = 0; i < agreement.patterns.size(); ++i) out += "---|";
        out += "\n";
        for (std::size_t i = 0; i < agreement.patterns.size(); ++i) {
            out += "| " + agreement.patterns[i] + " |";
            for (std::size_t j = 0; j < agreement.patterns.size(); ++j) {
                out += " " + fixed(agreement.dup_fraction[i][j], 2) + "/" +
                       fixed(agreement.nondup_fraction[i][j], 2) + " |";
            }
            out += "\n";
        }
    }

    if (!report.p_values.empty()) {
        out += "\n## Paired t-tests (per-pair correctness)\n\n";
        out += "| A | B | t | p (3 d.p.) | p (full) |\n|---|---|---|---|---|\n";
        for (const auto& entry : report.p_values) {
            out += "| " + entry.pattern_a + " | " + entry.pattern_b + " | " +
                   fixed(entry.t_statistic, 3) + " | " + fixed(entry.p_value, 3) + " | " +
                   canonical_double(entry.p_value) + " |\n";
        }
    }
    return out;
}

std::string report_csv(const EvalReport& report) {
    std::string out = "dataset,pattern,precision,recall,f_measure,unknown,tp,fp,fn,tn,"
                      "prompt_tokens,completion_tokens,cost_usd,theta\n";
    for (const auto& row : report.rows) {
        out += report.dataset + "," + row.pattern_id + "," +
               fixed_or_na(row.metrics.precision) + "," + fixed_or_na(row.metrics.recall) +
               "," + fixed_or_na(row.metrics.f_measure) + "," + std::to_string(row.unknown) +
               "," + std::to_string(row.confusion.tp) + "," + std::to_string(row.confusion.fp) +
               "," + std::to_string(row.confusion.fn) + "," + std::to_string(row.confusion.tn) +
               "," + std::to_string(row.usage.prompt_tokens) + "," +
               std::to_string(row.usage.completion_tokens) + "," + fixed(row.cost_usd, 2) +
               "," + (row.theta.has_value() ? fixed(*row.theta, 4) : "") + "\n";
    }
    return out;
}

std::string agreement_csv(const EvalReport& report) {
    if (!report.agreement.has_value()) return "";
    const auto& agreement = *report.agreement;
    std::string out = "pattern";
    for (const auto& pattern : agreement.patterns) out += "," + pattern;
    out += "\n";
    for (std::size_t i = 0; i < agreement.patterns.size(); ++i) {
        out += agreement.patterns[i];
        for (std::size_t j = 0; j < agreement.patterns.size(); ++j) {
            out += "," + fixed(agreement.dup_fraction[i][j], 2) + "/" +
                   fixed(agreement.nondup_fraction[i][j], 2);
        }
        out += "\n";
    }
    return out;
}

std::string pvalues_csv(const EvalReport& report) {
    if (report.p_values.empty()) return "";
    std::string out = "pattern_a,pattern_b,t_statistic,p_value,n\n";
    for (const auto& entry : report.p_values) {
        out += entry.pattern_a + "," + entry.pattern_b + "," +
               canonical_double(entry.t_statistic) + "," + canonical_double(entry.p_value) +
               "," + std::to_string(entry.n) + "\n";
    }
    return out;
}

} // namespace erprompt
