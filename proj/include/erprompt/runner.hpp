#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "erprompt/client.hpp"
#include "erprompt/eval.hpp"
#include "erprompt/ingest.hpp"
#include "erprompt/prompt.hpp"
#include "erprompt/report.hpp"

namespace erprompt {

struct RunConfig {
    std::string dataset;                  // "wdc" | "amazon-google"
    std::filesystem::path wdc_file;
    std::filesystem::path ag_dir;
    std::filesystem::path train_file;     // few-shot demonstrations source
    std::vector<std::string> patterns;
    std::string model_id = "mock";
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::uint64_t seed = 0;
    double mock_error_rate = 0.0;
    PriceTable prices;
    std::filesystem::path cache_path;     // empty = no cache
    int workers = 4;
    std::filesystem::path out_dir;
    std::optional<double> budget_usd;
    std::string primary_attribute = "title";

    bool mock_mode() const { return model_id == "mock"; }
    DecodingParams decoding() const { return {model_id, temperature, max_output_tokens}; }
};

struct RunStats {
    std::string pattern_id;
    std::size_t pairs = 0;
    std::size_t skipped = 0;      // already judged (resume)
    std::size_t oracle_calls = 0; // actual mock/endpoint fetches
    std::size_t cache_hits = 0;
    std::size_t unknown = 0;
    TokenUsage usage;             // this invocation's new calls only
    double cost_usd = 0.0;
};

/// Produces a completion for one rendered prompt. `truth` is the pair's
/// ground-truth label (present on every labeled run; the mock oracle
/// requires it).
using CompletionFn = std::function<CompletionResult(
    const RenderedPrompt& prompt, const DecodingParams& params, std::optional<bool> truth)>;

/// Completion function used by live runs: cached_complete over an LlmClient.
CompletionFn live_completion_fn(std::shared_ptr<LlmClient> client, ResponseCache* cache);

/// Completion function used by mock runs; counts fetches in *oracle_calls
/// when given. With a cache, fetches go through cached_complete.
CompletionFn mock_completion_fn(double error_rate, std::uint64_t seed,
                                ResponseCache* cache = nullptr,
                                std::atomic<std::size_t>* oracle_calls = nullptr);

/// Runs one pattern over the labeled pair set: render, complete, parse,
/// append one NDJSON judgment per pair under
///   <out>/<dataset>/<pattern>/judgments.ndjson
/// Judgments are written in pair order regardless of worker count, records
/// already on disk are skipped, and the writer flushes record by record, so
/// an interrupted run resumes to the identical file. Throws BudgetError when
/// the accumulated cost estimate crosses config.budget_usd.
RunStats run_pattern(const RunConfig& config, const PromptPattern& pattern,
                     const LabeledPairSet& pairs, const CompletionFn& complete_fn);

/// Builds the PromptPattern for a pattern id, sampling demonstrations from
/// `train` for few-shot (and asserting train/evaluation disjointness).
PromptPattern make_pattern(const RunConfig& config, const std::string& id,
                           const LabeledPairSet& evaluation,
                           const std::optional<LabeledPairSet>& train);

/// Ground-truth digests for one pattern run, in pair order.
std::vector<LabeledDigest> labeled_digests(const LabeledPairSet& pairs,
                                           const std::string& pattern_id,
                                           const DecodingParams& params);

/// Judgment NDJSON round trip.
void append_judgment(std::ostream& out, const MatchJudgment& judgment,
                     const TokenUsage& usage, bool label, bool cached,
                     std::int64_t latency_ms);
struct JudgmentRecord {
    MatchJudgment judgment;
    TokenUsage usage;
    bool label = false;
    bool cached = false;
    std::int64_t latency_ms = 0;
};
std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& file);

/// Loads a completed pattern run directory into a PatternRun, verifying the
/// expected digests when given. Missing digests raise IncompleteRunError.
PatternRun load_pattern_run(const std::filesystem::path& pattern_dir,
                            const std::string& pattern_id,
                            const PriceTable& prices,
                            const std::vector<LabeledDigest>* expected = nullptr);

/// Writes <out>/<dataset>/<pattern>/manifest.json for a finished run.
void write_manifest(const RunConfig& config, const std::string& pattern_id,
                    const RunStats& stats, const std::string& started_at,
                    const std::string& finished_at);

/// Current UTC time, ISO 8601 (e.g. "2026-08-09T12:00:00Z").
std::string utc_timestamp_now();

} // namespace erprompt
