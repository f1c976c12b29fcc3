#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <sys/wait.h>

#include <json.hpp>

#include "erprompt/errors.hpp"
#include "erprompt/golden.hpp"
#include "erprompt/report.hpp"
#include "erprompt/runner.hpp"
#include "support/synth.hpp"
#include "support/temp.hpp"

using namespace erprompt;
using erprompt::testing::TempDir;
using erprompt::testing::read_file;
using erprompt::testing::write_file;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string command = std::string(ERPROMPT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buffer[512];
    while (std::fgets(buffer, sizeof(buffer), pipe) != nullptr) {
        result.output += buffer;
    }
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

RunConfig base_config(const std::filesystem::path& out) {
    RunConfig config;
    config.dataset = "wdc";
    config.model_id = "mock";
    config.seed = 11;
    config.workers = 4;
    config.out_dir = out;
    config.prices = {0.0005, 0.0015};
    return config;
}

std::vector<std::string> six_patterns() {
    std::vector<std::string> ids;
    for (auto variant : all_pattern_variants()) ids.push_back(pattern_id(variant));
    return ids;
}

} // namespace

TEST_SUITE("runner") {

TEST_CASE("a zero-error mock run judges every pair correctly for all six patterns") {
    TempDir out;
    auto config = base_config(out.path());
    auto evaluation = synth::wdc_shaped(60, 18, 3);
    auto train = synth::wdc_shaped(20, 8, 4, "train");

    std::vector<PatternRun> runs;
    for (const auto& id : six_patterns()) {
        auto pattern = make_pattern(config, id, evaluation, train);
        auto stats = run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));
        CHECK(stats.pairs == 60);
        CHECK(stats.skipped == 0);
        CHECK(stats.oracle_calls == 60);
        CHECK(stats.unknown == 0);

        auto expected = labeled_digests(evaluation, id, config.decoding());
        auto run = load_pattern_run(out.path() / "wdc" / id, id, config.prices, &expected);
        CHECK(run.judgments.size() == 60);
        runs.push_back(std::move(run));
    }

    auto labels = labeled_digests(evaluation, "multi-attr", config.decoding());
    // Re-key all runs by a shared digest for the cross-pattern report.
    std::vector<LabeledDigest> shared;
    for (const auto& pair : evaluation.pairs) {
        shared.push_back({pair_content_digest(pair), *pair.label});
    }
    for (auto& run : runs) {
        auto expected = labeled_digests(evaluation, run.pattern_id, config.decoding());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            for (auto& judgment : run.judgments) {
                if (judgment.pair_digest == expected[i].digest) {
                    judgment.pair_digest = shared[i].digest;
                    break;
                }
            }
        }
    }
    auto report = build_report("wdc", runs, shared);
    REQUIRE(report.rows.size() == 6);
    for (const auto& row : report.rows) {
        REQUIRE(row.metrics.f_measure.has_value());
        CHECK(*row.metrics.f_measure == doctest::Approx(1.0));
        CHECK(row.unknown == 0);
    }
    REQUIRE(report.agreement.has_value());
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(report.agreement->dup_fraction[i][j] == 0.0);
            CHECK(report.agreement->nondup_fraction[i][j] == 0.0);
        }
    }
}

TEST_CASE("a rerun of a completed run makes zero oracle calls") {
    TempDir out;
    auto config = base_config(out.path());
    auto evaluation = synth::wdc_shaped(50, 15, 5);
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);

    std::atomic<std::size_t> calls{0};
    run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed, nullptr, &calls));
    CHECK(calls.load() == 50);

    auto again = run_pattern(config, pattern, evaluation,
                             mock_completion_fn(0.0, config.seed, nullptr, &calls));
    CHECK(calls.load() == 50);
    CHECK(again.skipped == 50);
    CHECK(again.oracle_calls == 0);
}

TEST_CASE("judgment files are identical regardless of worker count") {
    auto evaluation = synth::wdc_shaped(80, 20, 9);
    std::string reference;
    for (int workers : {1, 4, 13}) {
        TempDir out;
        auto config = base_config(out.path());
        config.workers = workers;
        config.mock_error_rate = 0.1;
        auto pattern = make_pattern(config, "multi-sim", evaluation, std::nullopt);
        run_pattern(config, pattern, evaluation,
                    mock_completion_fn(config.mock_error_rate, config.seed));
        auto content = read_file(out.path() / "wdc" / "multi-sim" / "judgments.ndjson");
        if (reference.empty()) reference = content;
        CHECK(content == reference);
    }
}

TEST_CASE("an interrupted run resumes to the byte-identical file") {
    auto evaluation = synth::wdc_shaped(40, 10, 13);

    TempDir reference_out;
    auto config = base_config(reference_out.path());
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);
    run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));
    const std::string reference =
        read_file(reference_out.path() / "wdc" / "multi-attr" / "judgments.ndjson");

    TempDir out;
    auto resumed_config = base_config(out.path());
    auto mock = mock_completion_fn(0.0, resumed_config.seed);
    std::atomic<int> calls_before_outage{0};
    CompletionFn flaky = [&](const RenderedPrompt& prompt, const DecodingParams& params,
                             std::optional<bool> truth) {
        if (calls_before_outage.fetch_add(1) >= 17) throw TransportError("injected outage");
        return mock(prompt, params, truth);
    };
    CHECK_THROWS_AS(run_pattern(resumed_config, pattern, evaluation, flaky), TransportError);

    const auto partial_path = out.path() / "wdc" / "multi-attr" / "judgments.ndjson";
    const std::string partial = read_file(partial_path);
    CHECK(partial.size() < reference.size());
    CHECK(reference.rfind(partial, 0) == 0); // partial file is a strict prefix

    auto resumed = run_pattern(resumed_config, pattern, evaluation,
                               mock_completion_fn(0.0, resumed_config.seed));
    CHECK(resumed.skipped > 0);
    CHECK(read_file(partial_path) == reference);
}

TEST_CASE("a torn trailing line is dropped and regenerated on resume") {
    auto evaluation = synth::wdc_shaped(12, 4, 29);
    TempDir out;
    auto config = base_config(out.path());
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);
    run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));

    const auto path = out.path() / "wdc" / "multi-attr" / "judgments.ndjson";
    const std::string full = read_file(path);
    write_file(path, full.substr(0, full.size() - 25)); // cut inside the last record

    auto stats = run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));
    CHECK(stats.skipped == 11);
    CHECK(stats.oracle_calls == 1);
    CHECK(read_file(path) == full);
}

TEST_CASE("the response cache eliminates second-pass oracle calls across out dirs") {
    auto evaluation = synth::wdc_shaped(30, 9, 7);
    TempDir cache_dir;
    ResponseCache cache(cache_dir / "cache.ndjson");
    std::atomic<std::size_t> calls{0};

    TempDir first_out;
    auto config = base_config(first_out.path());
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);
    auto stats = run_pattern(config, pattern, evaluation,
                             mock_completion_fn(0.0, config.seed, &cache, &calls));
    CHECK(stats.oracle_calls == 30);
    CHECK(calls.load() == 30);

    TempDir second_out;
    auto second_config = base_config(second_out.path());
    auto second = run_pattern(second_config, pattern, evaluation,
                              mock_completion_fn(0.0, second_config.seed, &cache, &calls));
    CHECK(calls.load() == 30); // every pair replayed from the cache
    CHECK(second.cache_hits == 30);
    CHECK(second.oracle_calls == 0);
    CHECK(second.cost_usd == 0.0);
}

TEST_CASE("a live run aborts once the budget is exceeded") {
    auto evaluation = synth::wdc_shaped(25, 8, 19);
    TempDir out;
    auto config = base_config(out.path());
    config.model_id = "fake-live"; // budget guard applies to non-mock runs
    config.budget_usd = 0.0001;
    config.workers = 2;
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);
    CompletionFn expensive = [](const RenderedPrompt&, const DecodingParams&,
                                std::optional<bool>) {
        CompletionResult result;
        result.text = "ANSWER: yes\nREASON: pricey\nCONFIDENCE: high";
        result.usage = {100000, 1000};
        return result;
    };
    CHECK_THROWS_AS(run_pattern(config, pattern, evaluation, expensive), BudgetError);
    // Partial results were flushed before the abort.
    CHECK(std::filesystem::exists(out.path() / "wdc" / "multi-attr" / "judgments.ndjson"));

    config.model_id = "mock";
    config.budget_usd = 0.0001; // mock runs spend nothing real; no abort
    auto stats = run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));
    CHECK(stats.pairs == 25);
}

TEST_CASE("few-shot demonstrations must be disjoint from the evaluation set") {
    auto evaluation = synth::wdc_shaped(10, 4, 23);
    auto config = base_config("unused");
    LabeledPairSet train = evaluation; // worst case: train equals evaluation
    train.name = "train";
    CHECK_THROWS_WITH_AS(make_pattern(config, "few-shot", evaluation, train),
                         doctest::Contains("disjoint"), ConfigError);
}

TEST_CASE("manifest records the config snapshot and stats") {
    TempDir out;
    auto config = base_config(out.path());
    auto evaluation = synth::wdc_shaped(8, 3, 31);
    auto pattern = make_pattern(config, "multi-attr", evaluation, std::nullopt);
    auto stats = run_pattern(config, pattern, evaluation, mock_completion_fn(0.0, config.seed));
    write_manifest(config, "multi-attr", stats, "2026-01-01T00:00:00Z",
                   "2026-01-01T00:00:05Z");
    auto manifest = nlohmann::json::parse(
        read_file(out.path() / "wdc" / "multi-attr" / "manifest.json"));
    CHECK(manifest["config"]["model"] == "mock");
    CHECK(manifest["config"]["seed"] == 11);
    CHECK(manifest["pairs"] == 8);
    CHECK(manifest.contains("git_describe"));
}

} // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("validate prints dataset counts") {
    TempDir dir;
    auto shape = synth::ag_shaped(30, 40, 50, 12, 77);
    synth::write_ag_directory(shape, dir.path());
    auto result = run_cli("validate --dataset amazon-google --ag-dir " + dir.path().string());
    CHECK(result.exit_code == 0);
    CHECK(result.output == "30 / 40 records, 50 pairs (12 positive)\n");

    auto wdc = synth::wdc_shaped(25, 10, 3);
    write_wdc(wdc, dir / "pairs.ndjson");
    auto wdc_result =
        run_cli("validate --dataset wdc --wdc-file " + (dir / "pairs.ndjson").string());
    CHECK(wdc_result.exit_code == 0);
    CHECK(wdc_result.output == "25 pairs (10 positive)\n");
}

TEST_CASE("validate exits 2 naming a missing file") {
    TempDir dir;
    auto shape = synth::ag_shaped(5, 6, 6, 2, 78);
    synth::write_ag_directory(shape, dir.path());
    std::filesystem::remove(dir.path() / kGoogleRecordsFile);
    auto result = run_cli("validate --dataset amazon-google --ag-dir " + dir.path().string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find(kGoogleRecordsFile) != std::string::npos);
}

TEST_CASE("run and report work end to end in mock mode") {
    TempDir dir;
    auto evaluation = synth::wdc_shaped(40, 12, 41);
    write_wdc(evaluation, dir / "pairs.ndjson");
    auto train = synth::wdc_shaped(15, 6, 42, "train");
    write_wdc(train, dir / "train.ndjson");
    const auto out = (dir / "out").string();

    auto run = run_cli("run --dataset wdc --wdc-file " + (dir / "pairs.ndjson").string() +
                       " --train-file " + (dir / "train.ndjson").string() +
                       " --model mock --seed 11 --workers 3 --out " + out +
                       " --price-in 0.0005 --price-out 0.0015");
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("multi-attr: 40 pairs") != std::string::npos);
    CHECK(run.output.find("total new cost") != std::string::npos);
    for (const auto& id : six_patterns()) {
        CHECK(std::filesystem::exists(dir / "out" / "wdc" / id / "judgments.ndjson"));
        CHECK(std::filesystem::exists(dir / "out" / "wdc" / id / "manifest.json"));
    }

    // A rerun resumes every pair and performs no new work.
    auto rerun = run_cli("run --dataset wdc --wdc-file " + (dir / "pairs.ndjson").string() +
                         " --train-file " + (dir / "train.ndjson").string() +
                         " --model mock --seed 11 --workers 3 --out " + out +
                         " --price-in 0.0005 --price-out 0.0015");
    CHECK(rerun.exit_code == 0);
    CHECK(rerun.output.find("multi-attr: 40 pairs, 40 resumed, 0 calls") !=
          std::string::npos);

    // Reports: deterministic and complete.
    auto report = run_cli("report --dataset wdc --out " + out + " --format all");
    CHECK(report.exit_code == 0);
    const auto report_json_path = dir / "out" / "reports" / "wdc.report.json";
    REQUIRE(std::filesystem::exists(report_json_path));
    const std::string first = read_file(report_json_path);
    auto again = run_cli("report --dataset wdc --out " + out + " --format all");
    CHECK(again.exit_code == 0);
    CHECK(read_file(report_json_path) == first);

    auto doc = nlohmann::json::parse(first);
    CHECK(doc["patterns"].size() == 6);
    for (const auto& row : doc["patterns"]) {
        CHECK(row["metrics"]["f_measure"].get<double>() == doctest::Approx(1.0));
        if (row["pattern"] == "multi-sim") {
            CHECK(row.contains("theta"));
            CHECK(row["curve"].size() > 0);
        }
    }
    CHECK(doc["agreement"]["patterns"].size() == 6);

    // Reported totals equal a per-record re-summation of the judgment files.
    const PriceTable prices{0.0005, 0.0015};
    double resummed = 0.0;
    for (const auto& id : six_patterns()) {
        for (const auto& record :
             load_judgments(dir / "out" / "wdc" / id / "judgments.ndjson")) {
            resummed += estimate_cost(record.usage, prices);
        }
    }
    CHECK(doc["total_cost_usd"].get<double>() == doctest::Approx(resummed).epsilon(1e-9));

    // Markdown mirrors the table layout.
    const std::string markdown = read_file(dir / "out" / "reports" / "wdc.report.md");
    CHECK(markdown.find("| Pattern | Precision | Recall | FM |") != std::string::npos);
    CHECK(markdown.find("| multi-sim | ") != std::string::npos);

    // Dropping records makes the report incomplete: exit 3 listing digests.
    const auto judgments_path = dir / "out" / "wdc" / "multi-attr" / "judgments.ndjson";
    const std::string full = read_file(judgments_path);
    const auto cut = full.find('\n', full.size() / 2);
    write_file(judgments_path, full.substr(0, cut + 1));
    auto incomplete = run_cli("report --dataset wdc --out " + out + " --format json");
    CHECK(incomplete.exit_code == 3);
    CHECK(incomplete.output.find("missing") != std::string::npos);
}

TEST_CASE("run accepts a JSON config file with flag overrides") {
    TempDir dir;
    auto evaluation = synth::wdc_shaped(10, 4, 51);
    write_wdc(evaluation, dir / "pairs.ndjson");
    nlohmann::json config = {
        {"dataset", "wdc"},
        {"wdc_file", (dir / "pairs.ndjson").string()},
        {"patterns", {"multi-attr", "no-persona"}},
        {"model", "mock"},
        {"seed", 4},
        {"out", (dir / "ignored").string()},
    };
    write_file(dir / "config.json", config.dump());
    // --out on the command line overrides the file's value.
    auto result = run_cli("run --config " + (dir / "config.json").string() + " --out " +
                          (dir / "out").string());
    CHECK(result.exit_code == 0);
    CHECK(std::filesystem::exists(dir / "out" / "wdc" / "multi-attr" / "judgments.ndjson"));
    CHECK(std::filesystem::exists(dir / "out" / "wdc" / "no-persona" / "judgments.ndjson"));
    CHECK_FALSE(std::filesystem::exists(dir / "ignored"));
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "wdc" / "multi-json"));
}

TEST_CASE("freeze-prompts verifies and reports drift") {
    TempDir dir;
    const std::string golden = (dir / "golden").string();
    auto created = run_cli("freeze-prompts --dir " + golden);
    CHECK(created.exit_code == 0);
    auto verified = run_cli("freeze-prompts --dir " + golden);
    CHECK(verified.exit_code == 0);
    CHECK(verified.output.find("match") != std::string::npos);

    // Tamper with one fixture; verification must fail with a diff.
    const auto fixture = dir / "golden" / "multi-attr.user.txt";
    write_file(fixture, read_file(fixture) + "\nEXTRA LINE");
    auto drifted = run_cli("freeze-prompts --dir " + golden);
    CHECK(drifted.exit_code == 1);
    CHECK(drifted.output.find("drift") != std::string::npos);
    CHECK(drifted.output.find("EXTRA LINE") != std::string::npos);

    auto updated = run_cli("freeze-prompts --update --dir " + golden);
    CHECK(updated.exit_code == 0);
    CHECK(run_cli("freeze-prompts --dir " + golden).exit_code == 0);
}

TEST_CASE("the committed golden fixtures match the templates") {
    auto result = run_cli("freeze-prompts --dir " + std::string(ERPROMPT_GOLDEN_DIR));
    CHECK(result.exit_code == 0);
    CHECK(std::filesystem::exists(std::filesystem::path(ERPROMPT_GOLDEN_DIR) /
                                  "persona.txt"));
}

TEST_CASE("unknown flags exit with the input-error code") {
    auto result = run_cli("run --no-such-flag");
    CHECK(result.exit_code == 2);
}

TEST_CASE("mock runs require an explicit seed") {
    TempDir dir;
    auto evaluation = synth::wdc_shaped(5, 2, 61);
    write_wdc(evaluation, dir / "pairs.ndjson");
    auto result = run_cli("run --dataset wdc --wdc-file " + (dir / "pairs.ndjson").string() +
                          " --model mock --pattern multi-attr --out " +
                          (dir / "out").string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("--seed") != std::string::npos);
}

TEST_CASE("cache-compact deduplicates a cache file in place") {
    TempDir dir;
    const auto cache_path = dir / "cache.ndjson";
    {
        ResponseCache cache(cache_path);
        RenderedPrompt prompt;
        prompt.pattern_id = "multi-attr";
        prompt.user = "u";
        cached_complete(prompt, {"mock", 0.0, 64}, cache, [] {
            CompletionResult result;
            result.text = "ANSWER: yes\nREASON: r";
            return result;
        });
    }
    const std::string line = read_file(cache_path);
    write_file(cache_path, line + line + line);
    auto result = run_cli("cache-compact --cache " + cache_path.string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("dropped 2") != std::string::npos);
    CHECK(read_file(cache_path) == line);
}

} // TEST_SUITE
