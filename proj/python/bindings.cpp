#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "erprompt/client.hpp"
#include "erprompt/eval.hpp"
#include "erprompt/golden.hpp"
#include "erprompt/ingest.hpp"
#include "erprompt/model.hpp"
#include "erprompt/parse.hpp"
#include "erprompt/prompt.hpp"
#include "erprompt/report.hpp"

namespace py = pybind11;
using namespace erprompt;

PYBIND11_MODULE(_erprompt, m) {
    m.doc() = "Prompt-pattern benchmarking for LLM-based entity resolution";

    py::class_<EntityProfile>(m, "EntityProfile")
        .def(py::init<>())
        .def(py::init([](std::string id, std::string source,
                         std::vector<std::pair<std::string, std::optional<std::string>>> attrs) {
                 return EntityProfile{std::move(id), std::move(source), std::move(attrs)};
             }),
             py::arg("id"), py::arg("source"), py::arg("attributes"))
        .def_readwrite("id", &EntityProfile::id)
        .def_readwrite("source", &EntityProfile::source)
        .def_readwrite("attributes", &EntityProfile::attributes)
        .def("__eq__", [](const EntityProfile& a, const EntityProfile& b) { return a == b; });

    py::class_<EntityCollection>(m, "EntityCollection")
        .def(py::init<>())
        .def_readwrite("name", &EntityCollection::name)
        .def_readwrite("schema", &EntityCollection::schema)
        .def_readwrite("profiles", &EntityCollection::profiles);

    py::class_<CandidatePair>(m, "CandidatePair")
        .def(py::init<>())
        .def(py::init([](EntityProfile left, EntityProfile right, std::optional<bool> label) {
                 return CandidatePair{std::move(left), std::move(right), label};
             }),
             py::arg("left"), py::arg("right"), py::arg("label") = std::nullopt)
        .def_readwrite("left", &CandidatePair::left)
        .def_readwrite("right", &CandidatePair::right)
        .def_readwrite("label", &CandidatePair::label);

    py::class_<PairKey>(m, "PairKey")
        .def_readonly("digest", &PairKey::digest);

    py::class_<DecodingParams>(m, "DecodingParams")
        .def(py::init<>())
        .def(py::init([](std::string model_id, double temperature, int max_output_tokens) {
                 return DecodingParams{std::move(model_id), temperature, max_output_tokens};
             }),
             py::arg("model_id"), py::arg("temperature") = 0.0,
             py::arg("max_output_tokens") = 512)
        .def_readwrite("model_id", &DecodingParams::model_id)
        .def_readwrite("temperature", &DecodingParams::temperature)
        .def_readwrite("max_output_tokens", &DecodingParams::max_output_tokens);

    py::class_<LabeledPairSet>(m, "LabeledPairSet")
        .def(py::init<>())
        .def_readwrite("name", &LabeledPairSet::name)
        .def_readwrite("pairs", &LabeledPairSet::pairs)
        .def_readwrite("positives", &LabeledPairSet::positives)
        .def_readwrite("negatives", &LabeledPairSet::negatives);

    py::class_<DemonstrationSet>(m, "DemonstrationSet")
        .def(py::init<>())
        .def_readwrite("demos", &DemonstrationSet::demos)
        .def_readwrite("seed", &DemonstrationSet::seed);

    py::enum_<PatternVariant>(m, "PatternVariant")
        .value("SingleAttr", PatternVariant::SingleAttr)
        .value("MultiAttr", PatternVariant::MultiAttr)
        .value("NoPersona", PatternVariant::NoPersona)
        .value("MultiJson", PatternVariant::MultiJson)
        .value("MultiSim", PatternVariant::MultiSim)
        .value("FewShot", PatternVariant::FewShot);

    py::enum_<ReplyKind>(m, "ReplyKind")
        .value("Decision", ReplyKind::Decision)
        .value("SimilarityScore", ReplyKind::SimilarityScore);

    py::class_<PromptPattern>(m, "PromptPattern")
        .def(py::init<>())
        .def(py::init([](PatternVariant variant, std::optional<std::string> primary_attribute,
                         std::optional<DemonstrationSet> demonstrations) {
                 return PromptPattern{variant, std::move(primary_attribute),
                                      std::move(demonstrations)};
             }),
             py::arg("variant"), py::arg("primary_attribute") = std::nullopt,
             py::arg("demonstrations") = std::nullopt)
        .def_readwrite("variant", &PromptPattern::variant)
        .def_readwrite("primary_attribute", &PromptPattern::primary_attribute)
        .def_readwrite("demonstrations", &PromptPattern::demonstrations);

    py::class_<RenderedPrompt>(m, "RenderedPrompt")
        .def_readonly("system", &RenderedPrompt::system)
        .def_readonly("user", &RenderedPrompt::user)
        .def_readonly("pattern_id", &RenderedPrompt::pattern_id)
        .def_readonly("expects", &RenderedPrompt::expects);

    py::enum_<Decision>(m, "Decision")
        .value("Match", Decision::Match)
        .value("NonMatch", Decision::NonMatch)
        .value("Unknown", Decision::Unknown);

    py::class_<MatchJudgment>(m, "MatchJudgment")
        .def(py::init<>())
        .def_readwrite("decision", &MatchJudgment::decision)
        .def_readwrite("similarity", &MatchJudgment::similarity)
        .def_readwrite("confidence", &MatchJudgment::confidence)
        .def_readwrite("explanation", &MatchJudgment::explanation)
        .def_readwrite("raw", &MatchJudgment::raw)
        .def_readwrite("pattern_id", &MatchJudgment::pattern_id)
        .def_readwrite("pair_digest", &MatchJudgment::pair_digest);

    py::class_<TokenUsage>(m, "TokenUsage")
        .def(py::init<>())
        .def(py::init([](std::int64_t prompt_tokens, std::int64_t completion_tokens) {
                 return TokenUsage{prompt_tokens, completion_tokens};
             }),
             py::arg("prompt_tokens"), py::arg("completion_tokens"))
        .def_readwrite("prompt_tokens", &TokenUsage::prompt_tokens)
        .def_readwrite("completion_tokens", &TokenUsage::completion_tokens);

    py::class_<PriceTable>(m, "PriceTable")
        .def(py::init<>())
        .def(py::init([](double prompt_price, double completion_price) {
                 return PriceTable{prompt_price, completion_price};
             }),
             py::arg("usd_per_1k_prompt_tokens"), py::arg("usd_per_1k_completion_tokens"))
        .def_readwrite("usd_per_1k_prompt_tokens", &PriceTable::usd_per_1k_prompt_tokens)
        .def_readwrite("usd_per_1k_completion_tokens",
                       &PriceTable::usd_per_1k_completion_tokens);

    py::class_<CompletionResult>(m, "CompletionResult")
        .def_readonly("text", &CompletionResult::text)
        .def_readonly("usage", &CompletionResult::usage)
        .def_readonly("cached", &CompletionResult::cached)
        .def_readonly("latency_ms", &CompletionResult::latency_ms)
        .def_readonly("attempts", &CompletionResult::attempts);

    py::class_<ConfusionCounts>(m, "ConfusionCounts")
        .def(py::init<>())
        .def(py::init([](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
                 return ConfusionCounts{tp, fp, fn, tn};
             }),
             py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0)
        .def_readwrite("tp", &ConfusionCounts::tp)
        .def_readwrite("fp", &ConfusionCounts::fp)
        .def_readwrite("fn", &ConfusionCounts::fn)
        .def_readwrite("tn", &ConfusionCounts::tn);

    py::class_<ConfusionOutcome>(m, "ConfusionOutcome")
        .def_readonly("counts", &ConfusionOutcome::counts)
        .def_readonly("unknown", &ConfusionOutcome::unknown);

    py::class_<EvalMetrics>(m, "EvalMetrics")
        .def_readonly("precision", &EvalMetrics::precision)
        .def_readonly("recall", &EvalMetrics::recall)
        .def_readonly("f_measure", &EvalMetrics::f_measure);

    py::class_<ThresholdPoint>(m, "ThresholdPoint")
        .def_readonly("threshold", &ThresholdPoint::threshold)
        .def_readonly("metrics", &ThresholdPoint::metrics);

    py::class_<ThresholdSweepResult>(m, "ThresholdSweepResult")
        .def_readonly("theta", &ThresholdSweepResult::theta)
        .def_readonly("best_f_measure", &ThresholdSweepResult::best_f_measure)
        .def_readonly("curve", &ThresholdSweepResult::curve);

    py::class_<ScoredPair>(m, "ScoredPair")
        .def(py::init([](double similarity, bool label) {
                 return ScoredPair{similarity, label};
             }),
             py::arg("similarity"), py::arg("label"))
        .def_readwrite("similarity", &ScoredPair::similarity)
        .def_readwrite("label", &ScoredPair::label);

    py::class_<AgreementMatrix>(m, "AgreementMatrix")
        .def_readonly("patterns", &AgreementMatrix::patterns)
        .def_readonly("dup_fraction", &AgreementMatrix::dup_fraction)
        .def_readonly("nondup_fraction", &AgreementMatrix::nondup_fraction);

    py::class_<PairedTestResult>(m, "PairedTestResult")
        .def_readonly("t_statistic", &PairedTestResult::t_statistic)
        .def_readonly("p_value", &PairedTestResult::p_value)
        .def_readonly("n", &PairedTestResult::n);

    py::class_<LabeledDigest>(m, "LabeledDigest")
        .def(py::init([](std::string digest, bool label) {
                 return LabeledDigest{std::move(digest), label};
             }),
             py::arg("digest"), py::arg("label"))
        .def_readwrite("digest", &LabeledDigest::digest)
        .def_readwrite("label", &LabeledDigest::label);

    // core-model
    m.def("canonicalize",
          [](const EntityProfile& profile) { return erprompt::canonicalize(profile); },
          py::arg("profile"));
    m.def("pair_key", &pair_key, py::arg("pattern_id"), py::arg("model_id"),
          py::arg("params"), py::arg("pair"));
    m.def("pair_content_digest", &pair_content_digest, py::arg("pair"));
    m.def("sha256_hex", [](const std::string& data) { return sha256_hex(data); },
          py::arg("data"));

    // ingest
    m.def("load_amazon_google", &load_amazon_google, py::arg("dir"));
    m.def("load_wdc", &load_wdc, py::arg("file"));
    m.def("write_wdc", &write_wdc, py::arg("pairs"), py::arg("file"));
    m.def("sample_demonstrations", &sample_demonstrations, py::arg("train"), py::arg("seed"));

    // prompt-engine
    m.def("pattern_id", &pattern_id, py::arg("variant"));
    m.def("pattern_from_id", &pattern_from_id, py::arg("id"));
    m.def("persona_text", &persona_text);
    m.def("serialize_concat", &serialize_concat, py::arg("profile"));
    m.def("serialize_json", &serialize_json, py::arg("profile"));
    m.def("render", &render, py::arg("pattern"), py::arg("pair"));
    m.def("user_char_length", &user_char_length, py::arg("pattern"), py::arg("pair"));
    m.def("golden_fixture_pair", &golden_fixture_pair);
    m.def("golden_fixture_demonstrations", &golden_fixture_demonstrations);

    // llm-client
    m.def("estimate_tokens", [](const std::string& text) { return estimate_tokens(text); },
          py::arg("text"));
    m.def("estimate_cost", &estimate_cost, py::arg("usage"), py::arg("prices"));
    m.def("prompt_digest", &prompt_digest, py::arg("prompt"));
    m.def("mock_complete", &mock_complete, py::arg("prompt"), py::arg("truth"),
          py::arg("error_rate"), py::arg("seed"));

    // parse
    m.def("parse_decision", &parse_decision, py::arg("text"));
    m.def("parse_similarity", &parse_similarity, py::arg("text"));

    // eval
    m.def("confusion", &confusion, py::arg("judgments"), py::arg("labels"));
    m.def("metrics", &metrics, py::arg("counts"));
    m.def("f_measure_of", &f_measure_of, py::arg("precision"), py::arg("recall"));
    m.def("sweep_threshold", &sweep_threshold, py::arg("scored"));
    m.def("agreement_matrix", &agreement_matrix, py::arg("per_pattern_judgments"),
          py::arg("labels"));
    m.def("paired_t_test", &paired_t_test, py::arg("a"), py::arg("b"));
    m.def("apply_threshold", &apply_threshold, py::arg("judgments"), py::arg("theta"));
    m.def("correctness_vector", &correctness_vector, py::arg("judgments"), py::arg("labels"));
}
