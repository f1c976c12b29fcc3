#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "erprompt/errors.hpp"
#include "erprompt/golden.hpp"
#include "erprompt/ingest.hpp"
#include "erprompt/runner.hpp"

namespace {

using erprompt::RunConfig;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitIncomplete = 3;
constexpr int kExitTransport = 4;
constexpr int kExitBudget = 5;

struct DatasetBundle {
    erprompt::LabeledPairSet pairs;
    std::optional<erprompt::LabeledPairSet> train;
    std::optional<std::pair<std::size_t, std::size_t>> record_counts; // amazon, google
};

DatasetBundle load_dataset(const RunConfig& config, bool with_train) {
    DatasetBundle bundle;
    if (config.dataset == "wdc") {
        if (config.wdc_file.empty()) {
            throw erprompt::ConfigError("--dataset wdc needs --wdc-file");
        }
        bundle.pairs = erprompt::load_wdc(config.wdc_file);
    } else if (config.dataset == "amazon-google") {
        if (config.ag_dir.empty()) {
            throw erprompt::ConfigError("--dataset amazon-google needs --ag-dir");
        }
        auto [amazon, google, pairs] = erprompt::load_amazon_google(config.ag_dir);
        bundle.record_counts = {amazon.profiles.size(), google.profiles.size()};
        bundle.pairs = std::move(pairs);
    } else {
        throw erprompt::ConfigError("unknown dataset '" + config.dataset +
                                    "' (expected wdc or amazon-google)");
    }
    if (with_train) {
        if (config.train_file.empty()) {
            throw erprompt::ConfigError("few-shot runs need --train-file");
        }
        bundle.train = erprompt::load_wdc(config.train_file);
    }
    return bundle;
}

// A JSON configuration file may supply any flag; explicit flags win.
void apply_config_file(const std::filesystem::path& file, RunConfig& config) {
    std::ifstream in(file);
    if (!in) throw erprompt::ConfigError("cannot open config file: " + file.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw erprompt::ConfigError("config file " + file.string() + ": " + e.what());
    }
    if (doc.contains("dataset")) config.dataset = doc["dataset"].get<std::string>();
    if (doc.contains("wdc_file")) config.wdc_file = doc["wdc_file"].get<std::string>();
    if (doc.contains("ag_dir")) config.ag_dir = doc["ag_dir"].get<std::string>();
    if (doc.contains("train_file")) config.train_file = doc["train_file"].get<std::string>();
    if (doc.contains("patterns")) config.patterns = doc["patterns"].get<std::vector<std::string>>();
    if (doc.contains("model")) config.model_id = doc["model"].get<std::string>();
    if (doc.contains("temperature")) config.temperature = doc["temperature"].get<double>();
    if (doc.contains("max_output_tokens")) {
        config.max_output_tokens = doc["max_output_tokens"].get<int>();
    }
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("mock_error_rate")) {
        config.mock_error_rate = doc["mock_error_rate"].get<double>();
    }
    if (doc.contains("price_in")) {
        config.prices.usd_per_1k_prompt_tokens = doc["price_in"].get<double>();
    }
    if (doc.contains("price_out")) {
        config.prices.usd_per_1k_completion_tokens = doc["price_out"].get<double>();
    }
    if (doc.contains("cache")) config.cache_path = doc["cache"].get<std::string>();
    if (doc.contains("workers")) config.workers = doc["workers"].get<int>();
    if (doc.contains("out")) config.out_dir = doc["out"].get<std::string>();
    if (doc.contains("budget_usd")) config.budget_usd = doc["budget_usd"].get<double>();
    if (doc.contains("primary_attribute")) {
        config.primary_attribute = doc["primary_attribute"].get<std::string>();
    }
}

std::vector<std::string> default_patterns() {
    std::vector<std::string> ids;
    for (auto variant : erprompt::all_pattern_variants()) {
        ids.push_back(erprompt::pattern_id(variant));
    }
    return ids;
}

int cmd_validate(const RunConfig& config) {
    const bool check_train = !config.train_file.empty();
    DatasetBundle bundle = load_dataset(config, check_train);
    if (bundle.record_counts.has_value()) {
        std::printf("%zu / %zu records, %zu pairs (%zu positive)\n",
                    bundle.record_counts->first, bundle.record_counts->second,
                    bundle.pairs.pairs.size(), bundle.pairs.positives);
    } else {
        std::printf("%zu pairs (%zu positive)\n", bundle.pairs.pairs.size(),
                    bundle.pairs.positives);
    }
    if (bundle.train.has_value()) {
        std::printf("train: %zu pairs (%zu positive)\n", bundle.train->pairs.size(),
                    bundle.train->positives);
    }
    return kExitOk;
}

int cmd_run(RunConfig config, bool seed_given) {
    if (config.patterns.empty()) config.patterns = default_patterns();
    if (config.out_dir.empty()) throw erprompt::ConfigError("--out is required");

    bool needs_train = false;
    for (const auto& id : config.patterns) {
        erprompt::pattern_from_id(id); // validate early
        if (id == "few-shot") needs_train = true;
    }
    if (!seed_given && (config.mock_mode() || needs_train)) {
        throw erprompt::ConfigError("--seed is required for mock or few-shot runs");
    }
    DatasetBundle bundle = load_dataset(config, needs_train);

    std::optional<erprompt::ResponseCache> cache;
    if (!config.cache_path.empty()) cache.emplace(config.cache_path);

    erprompt::CompletionFn complete_fn;
    if (config.mock_mode()) {
        complete_fn = erprompt::mock_completion_fn(config.mock_error_rate, config.seed,
                                                   cache ? &*cache : nullptr);
    } else {
        auto client = std::make_shared<erprompt::LlmClient>(
            std::shared_ptr<erprompt::ChatTransport>(erprompt::make_http_transport()));
        complete_fn = erprompt::live_completion_fn(client, cache ? &*cache : nullptr);
    }

    double new_cost = 0.0;
    for (const auto& id : config.patterns) {
        auto pattern = erprompt::make_pattern(config, id, bundle.pairs, bundle.train);
        const std::string started = erprompt::utc_timestamp_now();
        auto stats = erprompt::run_pattern(config, pattern, bundle.pairs, complete_fn);
        erprompt::write_manifest(config, id, stats, started, erprompt::utc_timestamp_now());
        new_cost += stats.cost_usd;
        std::printf("%s: %zu pairs, %zu resumed, %zu calls, %zu cache hits, %zu unknown, "
                    "new cost $%.4f\n",
                    id.c_str(), stats.pairs, stats.skipped, stats.oracle_calls,
                    stats.cache_hits, stats.unknown, stats.cost_usd);
    }
    std::printf("total new cost $%.4f\n", new_cost);
    return kExitOk;
}

// Fills run parameters (model, decoding, prices, dataset paths) from the
// first available manifest so `report` does not need them re-specified.
// Values the user passed explicitly stay untouched.
void apply_manifest_defaults(RunConfig& config, const CLI::App* report_cmd) {
    std::filesystem::path manifest_path;
    auto candidates = config.patterns.empty() ? default_patterns() : config.patterns;
    for (const auto& id : candidates) {
        auto path = config.out_dir / config.dataset / id / "manifest.json";
        if (std::filesystem::exists(path)) {
            manifest_path = path;
            break;
        }
    }
    if (manifest_path.empty()) return;
    std::ifstream in(manifest_path);
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(in);
    } catch (const nlohmann::json::exception&) {
        return; // a broken manifest only disables the defaults
    }
    if (!manifest.contains("config")) return;
    const auto& snapshot = manifest["config"];
    auto unset = [&](const char* flag) { return report_cmd->count(flag) == 0; };
    if (unset("--model") && snapshot.contains("model")) {
        config.model_id = snapshot["model"].get<std::string>();
    }
    if (unset("--temperature") && snapshot.contains("temperature")) {
        config.temperature = snapshot["temperature"].get<double>();
    }
    if (unset("--max-output-tokens") && snapshot.contains("max_output_tokens")) {
        config.max_output_tokens = snapshot["max_output_tokens"].get<int>();
    }
    if (unset("--price-in") && snapshot.contains("price_per_1k_prompt_tokens")) {
        config.prices.usd_per_1k_prompt_tokens =
            snapshot["price_per_1k_prompt_tokens"].get<double>();
    }
    if (unset("--price-out") && snapshot.contains("price_per_1k_completion_tokens")) {
        config.prices.usd_per_1k_completion_tokens =
            snapshot["price_per_1k_completion_tokens"].get<double>();
    }
    if (unset("--wdc-file") && snapshot.contains("wdc_file")) {
        config.wdc_file = snapshot["wdc_file"].get<std::string>();
    }
    if (unset("--ag-dir") && snapshot.contains("ag_dir")) {
        config.ag_dir = snapshot["ag_dir"].get<std::string>();
    }
}

int cmd_report(RunConfig config, const std::string& format) {
    if (config.out_dir.empty()) throw erprompt::ConfigError("--out is required");
    if (config.patterns.empty()) {
        // Report every pattern directory present for the dataset.
        for (const auto& id : default_patterns()) {
            if (std::filesystem::exists(config.out_dir / config.dataset / id /
                                         "judgments.ndjson")) {
                config.patterns.push_back(id);
            }
        }
        if (config.patterns.empty()) {
            throw erprompt::ConfigError("no completed runs under " +
                                        (config.out_dir / config.dataset).string());
        }
    }
    DatasetBundle bundle = load_dataset(config, false);

    const erprompt::DecodingParams params = config.decoding();
    std::vector<erprompt::PatternRun> runs;
    for (const auto& id : config.patterns) {
        auto expected = erprompt::labeled_digests(bundle.pairs, id, params);
        runs.push_back(erprompt::load_pattern_run(config.out_dir / config.dataset / id, id,
                                                  config.prices, &expected));
    }
    // Cross-pattern comparisons need one shared digest per pair, so re-key
    // every judgment by the pair's content digest.
    std::vector<erprompt::LabeledDigest> shared;
    shared.reserve(bundle.pairs.pairs.size());
    for (const auto& pair : bundle.pairs.pairs) {
        shared.push_back({erprompt::pair_content_digest(pair), pair.label.value_or(false)});
    }
    for (std::size_t r = 0; r < runs.size(); ++r) {
        auto expected = erprompt::labeled_digests(bundle.pairs, runs[r].pattern_id, params);
        std::unordered_map<std::string, std::string> to_shared;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            to_shared[expected[i].digest] = shared[i].digest;
        }
        for (auto& judgment : runs[r].judgments) {
            judgment.pair_digest = to_shared.at(judgment.pair_digest);
        }
    }

    auto report = erprompt::build_report(config.dataset, runs, shared);
    const auto report_dir = config.out_dir / "reports";
    std::filesystem::create_directories(report_dir);
    auto write = [&](const std::string& name, const std::string& content) {
        if (content.empty()) return;
        std::ofstream out(report_dir / name, std::ios::binary | std::ios::trunc);
        out << content;
        std::printf("wrote %s\n", (report_dir / name).string().c_str());
    };
    if (format == "json" || format == "all") {
        write(config.dataset + ".report.json", erprompt::report_json(report));
    }
    if (format == "md" || format == "all") {
        write(config.dataset + ".report.md", erprompt::report_markdown(report));
    }
    if (format == "csv" || format == "all") {
        write(config.dataset + ".report.csv", erprompt::report_csv(report));
        write(config.dataset + ".agreement.csv", erprompt::agreement_csv(report));
        write(config.dataset + ".pvalues.csv", erprompt::pvalues_csv(report));
    }
    return kExitOk;
}

int run_app(int argc, char** argv) {
    CLI::App app{"erprompt: prompt-pattern benchmarking for LLM-based entity resolution"};
    app.require_subcommand(1);

    RunConfig config;
    std::string format = "all";
    std::string config_file;
    std::string golden_dir = "prompts/golden";
    bool update_golden = false;
    std::string cache_file;

    auto add_dataset_flags = [&config](CLI::App* cmd) {
        cmd->add_option("--dataset", config.dataset, "wdc or amazon-google");
        cmd->add_option("--wdc-file", config.wdc_file, "WDC pair file (NDJSON)");
        cmd->add_option("--ag-dir", config.ag_dir, "Amazon-Google benchmark directory");
        cmd->add_option("--train-file", config.train_file,
                        "training pairs (NDJSON) for few-shot demonstrations");
    };

    auto* validate = app.add_subcommand("validate", "load datasets and print their counts");
    add_dataset_flags(validate);

    auto* run = app.add_subcommand("run", "run prompt patterns over a dataset");
    add_dataset_flags(run);
    run->add_option("--config", config_file, "JSON config file (flags override it)");
    run->add_option("--pattern", config.patterns, "pattern id (repeatable; default all six)");
    run->add_option("--model", config.model_id, "model id, or 'mock' for the offline oracle");
    run->add_option("--temperature", config.temperature, "sampling temperature");
    run->add_option("--max-output-tokens", config.max_output_tokens, "completion token cap");
    run->add_option("--seed", config.seed, "seed for mock oracle and demonstration sampling");
    run->add_option("--mock-error-rate", config.mock_error_rate,
                    "mock oracle flip probability in [0,1]");
    run->add_option("--price-in", config.prices.usd_per_1k_prompt_tokens,
                    "USD per 1k prompt tokens");
    run->add_option("--price-out", config.prices.usd_per_1k_completion_tokens,
                    "USD per 1k completion tokens");
    run->add_option("--cache", config.cache_path, "response cache file (NDJSON)");
    run->add_option("--workers", config.workers, "concurrent in-flight requests");
    run->add_option("--out", config.out_dir, "output directory");
    run->add_option("--budget-usd", config.budget_usd,
                    "abort a live run when the estimated spend crosses this cap");
    run->add_option("--primary-attribute", config.primary_attribute,
                    "attribute used by single-attr (default: title)");

    auto* report = app.add_subcommand("report", "build evaluation reports from finished runs");
    add_dataset_flags(report);
    report->add_option("--pattern", config.patterns,
                       "pattern id (repeatable; default: every finished pattern)");
    report->add_option("--model", config.model_id, "model id used by the run");
    report->add_option("--temperature", config.temperature, "temperature used by the run");
    report->add_option("--max-output-tokens", config.max_output_tokens,
                       "completion cap used by the run");
    report->add_option("--price-in", config.prices.usd_per_1k_prompt_tokens,
                       "USD per 1k prompt tokens");
    report->add_option("--price-out", config.prices.usd_per_1k_completion_tokens,
                       "USD per 1k completion tokens");
    report->add_option("--out", config.out_dir, "run output directory");
    report->add_option("--format", format, "md, csv, json, or all")
        ->check(CLI::IsMember({"md", "csv", "json", "all"}));

    auto* freeze = app.add_subcommand("freeze-prompts",
                                      "write or verify the golden prompt fixtures");
    freeze->add_option("--dir", golden_dir, "fixture directory (default prompts/golden)");
    freeze->add_flag("--update", update_golden, "rewrite fixtures instead of verifying");

    auto* compact = app.add_subcommand("cache-compact", "deduplicate a response cache file");
    compact->add_option("--cache", cache_file, "cache file to compact")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    bool seed_given = run->count("--seed") > 0;
    if (!config_file.empty()) {
        // Re-apply flag values on top of the file: parse once more after
        // loading defaults from the file.
        RunConfig from_file;
        apply_config_file(config_file, from_file);
        {
            std::ifstream in(config_file);
            ordered_json doc = ordered_json::parse(in, nullptr, false);
            if (doc.is_object() && doc.contains("seed")) seed_given = true;
        }
        // Flags that were not given on the command line fall back to the file.
        auto keep_if_unset = [&](const char* flag, auto member) {
            if (run->count(flag) == 0) config.*member = from_file.*member;
        };
        keep_if_unset("--dataset", &RunConfig::dataset);
        keep_if_unset("--wdc-file", &RunConfig::wdc_file);
        keep_if_unset("--ag-dir", &RunConfig::ag_dir);
        keep_if_unset("--train-file", &RunConfig::train_file);
        keep_if_unset("--pattern", &RunConfig::patterns);
        keep_if_unset("--model", &RunConfig::model_id);
        keep_if_unset("--temperature", &RunConfig::temperature);
        keep_if_unset("--max-output-tokens", &RunConfig::max_output_tokens);
        keep_if_unset("--seed", &RunConfig::seed);
        keep_if_unset("--mock-error-rate", &RunConfig::mock_error_rate);
        keep_if_unset("--cache", &RunConfig::cache_path);
        keep_if_unset("--workers", &RunConfig::workers);
        keep_if_unset("--out", &RunConfig::out_dir);
        keep_if_unset("--primary-attribute", &RunConfig::primary_attribute);
        if (run->count("--price-in") == 0) {
            config.prices.usd_per_1k_prompt_tokens = from_file.prices.usd_per_1k_prompt_tokens;
        }
        if (run->count("--price-out") == 0) {
            config.prices.usd_per_1k_completion_tokens =
                from_file.prices.usd_per_1k_completion_tokens;
        }
        if (run->count("--budget-usd") == 0) config.budget_usd = from_file.budget_usd;
    }

    if (validate->parsed()) return cmd_validate(config);
    if (run->parsed()) return cmd_run(config, seed_given);
    if (report->parsed()) {
        apply_manifest_defaults(config, report);
        return cmd_report(config, format);
    }
    if (freeze->parsed()) return erprompt::freeze_prompts(golden_dir, update_golden, std::cout);
    if (compact->parsed()) {
        erprompt::ResponseCache cache{cache_file};
        std::printf("dropped %zu duplicate records\n", cache.compact());
        return kExitOk;
    }
    return kExitInput;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const erprompt::BudgetError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBudget;
    } catch (const erprompt::TransportError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTransport;
    } catch (const erprompt::RequestError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTransport;
    } catch (const erprompt::EmptyResponseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTransport;
    } catch (const erprompt::IncompleteRunError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIncomplete;
    } catch (const erprompt::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
}
