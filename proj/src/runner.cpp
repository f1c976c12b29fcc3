#include "erprompt/runner.hpp"

#include <condition_variable>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "erprompt/errors.hpp"

#ifndef ERPROMPT_GIT_DESCRIBE
#define ERPROMPT_GIT_DESCRIBE "unknown"
#endif

namespace erprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json judgment_json(const JudgmentRecord& record) {
    const MatchJudgment& judgment = record.judgment;
    ordered_json entry = ordered_json::object();
    entry["digest"] = judgment.pair_digest;
    entry["pattern"] = judgment.pattern_id;
    entry["decision"] = decision_name(judgment.decision);
    if (judgment.similarity.has_value()) entry["similarity"] = *judgment.similarity;
    else entry["similarity"] = nullptr;
    if (judgment.confidence.has_value()) entry["confidence"] = *judgment.confidence;
    else entry["confidence"] = nullptr;
    entry["explanation"] = judgment.explanation;
    entry["raw"] = judgment.raw;
    entry["usage"] = {{"prompt_tokens", record.usage.prompt_tokens},
                      {"completion_tokens", record.usage.completion_tokens}};
    entry["label"] = record.label;
    entry["cached"] = record.cached;
    entry["latency_ms"] = record.latency_ms;
    return entry;
}

JudgmentRecord judgment_from_json(const ordered_json& entry) {
    JudgmentRecord record;
    record.judgment.pair_digest = entry.at("digest").get<std::string>();
    record.judgment.pattern_id = entry.at("pattern").get<std::string>();
    record.judgment.decision = decision_from_name(entry.at("decision").get<std::string>());
    if (!entry.at("similarity").is_null()) {
        record.judgment.similarity = entry.at("similarity").get<double>();
    }
    if (!entry.at("confidence").is_null()) {
        record.judgment.confidence = entry.at("confidence").get<std::string>();
    }
    record.judgment.explanation = entry.at("explanation").get<std::string>();
    record.judgment.raw = entry.value("raw", "");
    record.usage.prompt_tokens = entry.at("usage").at("prompt_tokens").get<std::int64_t>();
    record.usage.completion_tokens =
        entry.at("usage").at("completion_tokens").get<std::int64_t>();
    record.label = entry.at("label").get<bool>();
    record.cached = entry.value("cached", false);
    record.latency_ms = entry.value("latency_ms", std::int64_t{0});
    return record;
}

// Digests already present in a judgment file. A torn final line (write cut
// off mid-record) is dropped so the rerun regenerates that pair.
std::unordered_set<std::string> existing_digests(const std::filesystem::path& file) {
    std::unordered_set<std::string> digests;
    std::ifstream in(file, std::ios::binary);
    if (!in) return digests;
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    std::size_t keep = content.size();
    if (keep > 0 && content.back() != '\n') {
        std::size_t cut = content.find_last_of('\n');
        keep = cut == std::string::npos ? 0 : cut + 1;
    }
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < keep) {
        std::size_t end = content.find('\n', start);
        std::string_view line(content.data() + start, end - start);
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            auto entry = ordered_json::parse(line);
            digests.insert(entry.at("digest").get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw FormatError(file.string() + ": malformed judgment on line " +
                              std::to_string(line_no));
        }
    }
    if (keep < content.size()) {
        std::filesystem::resize_file(file, keep);
    }
    return digests;
}

} // namespace

std::string utc_timestamp_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

CompletionFn live_completion_fn(std::shared_ptr<LlmClient> client, ResponseCache* cache) {
    return [client, cache](const RenderedPrompt& prompt, const DecodingParams& params,
                           std::optional<bool>) {
        if (cache != nullptr) {
            return cached_complete(prompt, params, *cache,
                                   [&] { return client->complete(prompt, params); });
        }
        return client->complete(prompt, params);
    };
}

CompletionFn mock_completion_fn(double error_rate, std::uint64_t seed, ResponseCache* cache,
                                std::atomic<std::size_t>* oracle_calls) {
    return [error_rate, seed, cache, oracle_calls](const RenderedPrompt& prompt,
                                                   const DecodingParams& params,
                                                   std::optional<bool> truth) {
        auto fetch = [&] {
            if (oracle_calls != nullptr) oracle_calls->fetch_add(1);
            return mock_complete(prompt, truth, error_rate, seed);
        };
        if (cache != nullptr) return cached_complete(prompt, params, *cache, fetch);
        return fetch();
    };
}

std::vector<LabeledDigest> labeled_digests(const LabeledPairSet& pairs,
                                           const std::string& pattern_id,
                                           const DecodingParams& params) {
    std::vector<LabeledDigest> out;
    out.reserve(pairs.pairs.size());
    for (const auto& pair : pairs.pairs) {
        out.push_back({pair_key(pattern_id, params.model_id, params, pair).digest,
                       pair.label.value_or(false)});
    }
    return out;
}

PromptPattern make_pattern(const RunConfig& config, const std::string& id,
                           const LabeledPairSet& evaluation,
                           const std::optional<LabeledPairSet>& train) {
    PromptPattern pattern;
    pattern.variant = pattern_from_id(id);
    if (pattern.variant == PatternVariant::SingleAttr) {
        pattern.primary_attribute = config.primary_attribute;
    }
    if (pattern.variant == PatternVariant::FewShot) {
        if (!train.has_value()) {
            throw ConfigError("few-shot runs need --train-file for demonstrations");
        }
        auto demos = sample_demonstrations(*train, config.seed);
        std::unordered_set<std::string> eval_pairs;
        for (const auto& pair : evaluation.pairs) {
            eval_pairs.insert(pair_content_digest(pair));
        }
        for (const auto& demo : demos.demos) {
            if (eval_pairs.count(pair_content_digest(demo))) {
                throw ConfigError("demonstration pair (" + demo.left.id + ", " +
                                  demo.right.id + ") appears in the evaluation set; "
                                  "the training partition must be disjoint");
            }
        }
        pattern.demonstrations = std::move(demos);
    }
    return pattern;
}

void append_judgment(std::ostream& out, const MatchJudgment& judgment,
                     const TokenUsage& usage, bool label, bool cached,
                     std::int64_t latency_ms) {
    JudgmentRecord record{judgment, usage, label, cached, latency_ms};
    out << judgment_json(record).dump() << '\n';
}

std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestError("cannot open judgment file: " + file.string());
    std::vector<JudgmentRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(judgment_from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception&) {
            throw FormatError(file.string() + ": malformed judgment on line " +
                              std::to_string(line_no));
        }
    }
    return records;
}

RunStats run_pattern(const RunConfig& config, const PromptPattern& pattern,
                     const LabeledPairSet& pairs, const CompletionFn& complete_fn) {
    const std::string id = pattern_id(pattern.variant);
    const DecodingParams params = config.decoding();
    const auto dir = config.out_dir / config.dataset / id;
    std::filesystem::create_directories(dir);
    const auto judgments_path = dir / "judgments.ndjson";
    const auto done = existing_digests(judgments_path);

    RunStats stats;
    stats.pattern_id = id;
    stats.pairs = pairs.pairs.size();

    struct Slot {
        std::string digest;
        bool skip = false;
    };
    std::vector<Slot> slots(pairs.pairs.size());
    std::unordered_set<std::string> seen = done; // collapses repeated pairs too
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
        slots[i].digest = pair_key(id, params.model_id, params, pairs.pairs[i]).digest;
        slots[i].skip = !seen.insert(slots[i].digest).second;
        if (slots[i].skip) ++stats.skipped;
    }

    std::ofstream out(judgments_path, std::ios::binary | std::ios::app);
    if (!out) throw IngestError("cannot open judgment file for append: " +
                                judgments_path.string());

    std::mutex mutex;
    std::condition_variable cv;
    std::map<std::size_t, std::optional<std::string>> ready; // index -> line (nullopt = skipped)
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> abort{false};
    std::size_t active_workers = 0;
    std::exception_ptr failure;
    double spent = 0.0;

    auto deposit = [&](std::size_t index, std::optional<std::string> line) {
        std::lock_guard lock(mutex);
        ready.emplace(index, std::move(line));
        cv.notify_all();
    };

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t index = cursor.fetch_add(1);
            if (index >= slots.size()) break;
            if (slots[index].skip) {
                deposit(index, std::nullopt);
                continue;
            }
            try {
                const CandidatePair& pair = pairs.pairs[index];
                RenderedPrompt prompt = render(pattern, pair);
                CompletionResult result = complete_fn(prompt, params, pair.label);

                MatchJudgment judgment = prompt.expects == ReplyKind::SimilarityScore
                                             ? parse_similarity(result.text)
                                             : parse_decision(result.text);
                judgment.pattern_id = id;
                judgment.pair_digest = slots[index].digest;
                const bool unknown = prompt.expects == ReplyKind::SimilarityScore
                                         ? !judgment.similarity.has_value()
                                         : judgment.decision == Decision::Unknown;

                JudgmentRecord record{judgment, result.usage, pair.label.value_or(false),
                                      result.cached, result.latency_ms};
                std::string line = judgment_json(record).dump();
                {
                    std::lock_guard lock(mutex);
                    if (unknown) ++stats.unknown;
                    if (result.cached) {
                        ++stats.cache_hits;
                    } else {
                        ++stats.oracle_calls;
                        stats.usage += result.usage;
                        const double cost = estimate_cost(result.usage, config.prices);
                        stats.cost_usd += cost;
                        spent += cost;
                        if (!config.mock_mode() && config.budget_usd.has_value() &&
                            spent > *config.budget_usd) {
                            if (!failure) {
                                failure = std::make_exception_ptr(BudgetError(
                                    "estimated spend $" + canonical_double(spent) +
                                    " exceeds budget $" +
                                    canonical_double(*config.budget_usd)));
                            }
                            abort.store(true);
                        }
                    }
                }
                deposit(index, std::move(line));
            } catch (...) {
                // No deposit for the failed index: the writer stops at the
                // hole, keeping the file a prefix of the canonical full run.
                {
                    std::lock_guard lock(mutex);
                    if (!failure) failure = std::current_exception();
                }
                abort.store(true);
                cv.notify_all();
                break;
            }
        }
        std::lock_guard lock(mutex);
        --active_workers;
        cv.notify_all();
    };

    const int worker_count = std::max(1, config.workers);
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mutex);
        active_workers = static_cast<std::size_t>(worker_count);
    }
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker);

    // Writer: flush results in pair order so any prefix of the file is the
    // prefix of the deterministic full file.
    std::size_t next = 0;
    {
        std::unique_lock lock(mutex);
        while (next < slots.size()) {
            cv.wait(lock, [&] { return ready.count(next) > 0 || active_workers == 0; });
            auto it = ready.find(next);
            if (it == ready.end()) break; // aborted before this index completed
            if (it->second.has_value()) {
                out << *it->second << '\n';
                out.flush();
            }
            ready.erase(it);
            ++next;
        }
    }
    for (auto& thread : threads) thread.join();
    out.flush();
    if (failure) std::rethrow_exception(failure);
    return stats;
}

PatternRun load_pattern_run(const std::filesystem::path& pattern_dir,
                            const std::string& pattern_id, const PriceTable& prices,
                            const std::vector<LabeledDigest>* expected) {
    auto records = load_judgments(pattern_dir / "judgments.ndjson");
    PatternRun run;
    run.pattern_id = pattern_id;
    std::unordered_set<std::string> wanted;
    if (expected != nullptr) {
        for (const auto& labeled : *expected) wanted.insert(labeled.digest);
    }
    for (auto& record : records) {
        // Records outside the expected set (say, from a different decoding
        // configuration sharing the directory) are ignored.
        if (expected != nullptr && !wanted.count(record.judgment.pair_digest)) continue;
        run.usage += record.usage;
        run.judgments.push_back(std::move(record.judgment));
    }
    run.cost_usd = estimate_cost(run.usage, prices);
    if (expected != nullptr) {
        std::unordered_set<std::string> have;
        for (const auto& judgment : run.judgments) have.insert(judgment.pair_digest);
        std::string missing;
        std::size_t missing_count = 0;
        for (const auto& labeled : *expected) {
            if (!have.count(labeled.digest)) {
                ++missing_count;
                if (missing_count <= 20) {
                    if (!missing.empty()) missing += ", ";
                    missing += labeled.digest;
                }
            }
        }
        if (missing_count > 0) {
            if (missing_count > 20) {
                missing += " (and " + std::to_string(missing_count - 20) + " more)";
            }
            throw IncompleteRunError(pattern_dir.string() + ": run is missing " +
                                     std::to_string(missing_count) +
                                     " judgments for digests: " + missing);
        }
    }
    return run;
}

void write_manifest(const RunConfig& config, const std::string& pattern_id,
                    const RunStats& stats, const std::string& started_at,
                    const std::string& finished_at) {
    ordered_json manifest = ordered_json::object();
    ordered_json snapshot = ordered_json::object();
    snapshot["dataset"] = config.dataset;
    snapshot["wdc_file"] = config.wdc_file.string();
    snapshot["ag_dir"] = config.ag_dir.string();
    snapshot["train_file"] = config.train_file.string();
    snapshot["pattern"] = pattern_id;
    snapshot["model"] = config.model_id;
    snapshot["temperature"] = config.temperature;
    snapshot["max_output_tokens"] = config.max_output_tokens;
    snapshot["seed"] = config.seed;
    snapshot["mock_error_rate"] = config.mock_error_rate;
    snapshot["price_per_1k_prompt_tokens"] = config.prices.usd_per_1k_prompt_tokens;
    snapshot["price_per_1k_completion_tokens"] = config.prices.usd_per_1k_completion_tokens;
    snapshot["cache"] = config.cache_path.string();
    snapshot["workers"] = config.workers;
    snapshot["out"] = config.out_dir.string();
    snapshot["primary_attribute"] = config.primary_attribute;
    if (config.budget_usd.has_value()) snapshot["budget_usd"] = *config.budget_usd;
    manifest["config"] = std::move(snapshot);
    manifest["git_describe"] = ERPROMPT_GIT_DESCRIBE;
    manifest["started_at"] = started_at;
    manifest["finished_at"] = finished_at;
    manifest["pairs"] = stats.pairs;
    manifest["skipped"] = stats.skipped;
    manifest["oracle_calls"] = stats.oracle_calls;
    manifest["cache_hits"] = stats.cache_hits;
    manifest["unknown"] = stats.unknown;
    manifest["new_prompt_tokens"] = stats.usage.prompt_tokens;
    manifest["new_completion_tokens"] = stats.usage.completion_tokens;
    manifest["new_cost_usd"] = stats.cost_usd;

    const auto dir = config.out_dir / config.dataset / pattern_id;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
}

} // namespace erprompt
