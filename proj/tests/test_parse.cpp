#include <doctest.h>

#include <random>

#include "erprompt/client.hpp"
#include "erprompt/golden.hpp"
#include "erprompt/parse.hpp"
#include "erprompt/prompt.hpp"

using namespace erprompt;

TEST_SUITE("parse") {

TEST_CASE("mandated ANSWER format parses decision, reason and confidence") {
    auto judgment = parse_decision("ANSWER: yes\nREASON: same suite\nCONFIDENCE: high");
    CHECK(judgment.decision == Decision::Match);
    CHECK(judgment.explanation == "same suite");
    REQUIRE(judgment.confidence.has_value());
    CHECK(*judgment.confidence == "high");
}

TEST_CASE("ANSWER line is case-insensitive and tolerates punctuation") {
    CHECK(parse_decision("answer: YES.\nreason: obvious").decision == Decision::Match);
    CHECK(parse_decision("Answer: No, they differ").decision == Decision::NonMatch);
}

TEST_CASE("leading yes/no token decides when no ANSWER line exists") {
    auto judgment =
        parse_decision("No, these records refer to different chipsets (Z370M vs B250M).");
    CHECK(judgment.decision == Decision::NonMatch);
    CHECK(parse_decision("Yes! Both are the 1950X.").decision == Decision::Match);
}

TEST_CASE("first-sentence phrases decide freeform replies") {
    CHECK(parse_decision("The two records are identical products.").decision ==
          Decision::Match);
    CHECK(parse_decision("These are clearly the same product, sold twice.").decision ==
          Decision::Match);
    CHECK(parse_decision("This candidate pair is a non-duplicate.").decision ==
          Decision::NonMatch);
    CHECK(parse_decision("They describe a different product entirely.").decision ==
          Decision::NonMatch);
    // Negation wins over affirmation inside the sentence.
    CHECK(parse_decision("The records are not identical despite similar names.").decision ==
          Decision::NonMatch);
}

TEST_CASE("cascade exhaustion encodes as Unknown") {
    CHECK(parse_decision("Possibly related.").decision == Decision::Unknown);
    CHECK(parse_decision("").decision == Decision::Unknown);
    CHECK(parse_decision("   \n\n  ").decision == Decision::Unknown);
}

TEST_CASE("explanation falls back to the full text without REASON") {
    auto judgment = parse_decision("Yes, same product family.");
    CHECK(judgment.explanation == "Yes, same product family.");
    CHECK_FALSE(judgment.confidence.has_value());
}

TEST_CASE("negation phrases never parse to Match") {
    CHECK(parse_decision("ANSWER: yes\nREASON: they are not identical really").decision !=
          Decision::Match);
    CHECK(parse_decision("Yes. On reflection these are not the same.").decision !=
          Decision::Match);

    std::mt19937_64 gen(4);
    const std::vector<std::string> heads = {"", "ANSWER: yes\n", "Yes, ",
                                            "The records look alike. "};
    const std::vector<std::string> negations = {"not identical", "not the same"};
    const std::vector<std::string> tails = {"", " at all.", " per the specs."};
    for (int i = 0; i < 200; ++i) {
        std::string text = heads[gen() % heads.size()] + "These products are " +
                           negations[gen() % negations.size()] + tails[gen() % tails.size()];
        CHECK(parse_decision(text).decision != Decision::Match);
    }
}

TEST_CASE("similarity parses the SCORE line") {
    auto judgment = parse_similarity("SCORE: 0.92\nREASON: near-identical titles");
    REQUIRE(judgment.similarity.has_value());
    CHECK(*judgment.similarity == doctest::Approx(0.92));
    CHECK(judgment.explanation == "near-identical titles");
}

TEST_CASE("similarity accepts a standalone in-range number") {
    auto judgment = parse_similarity("I would rate the similarity 1");
    REQUIRE(judgment.similarity.has_value());
    CHECK(*judgment.similarity == doctest::Approx(1.0));
}

TEST_CASE("similarity skips out-of-range and glued numbers") {
    CHECK_FALSE(parse_similarity("SCORE: 7").similarity.has_value());
    CHECK(parse_similarity("SCORE: 7").decision == Decision::Unknown);
    auto glued = parse_similarity("The 1950X runs at 4.00GHz; similarity about 0.75");
    REQUIRE(glued.similarity.has_value());
    CHECK(*glued.similarity == doctest::Approx(0.75));
    auto counted = parse_similarity("Between the 2 products the overlap is 0.5 overall");
    REQUIRE(counted.similarity.has_value());
    CHECK(*counted.similarity == doctest::Approx(0.5));
    CHECK_FALSE(parse_similarity("All scores are negative: -0.4").similarity.has_value());
}

TEST_CASE("parser is total over arbitrary bytes") {
    std::mt19937_64 gen(99);
    for (int i = 0; i < 2000; ++i) {
        std::string text;
        const std::size_t len = gen() % 120;
        for (std::size_t c = 0; c < len; ++c) {
            text.push_back(static_cast<char>(gen() % 256));
        }
        MatchJudgment decision;
        MatchJudgment similarity;
        CHECK_NOTHROW(decision = parse_decision(text));
        CHECK_NOTHROW(similarity = parse_similarity(text));
        CHECK((decision.decision == Decision::Match ||
               decision.decision == Decision::NonMatch ||
               decision.decision == Decision::Unknown));
        if (similarity.similarity.has_value()) {
            CHECK(*similarity.similarity >= 0.0);
            CHECK(*similarity.similarity <= 1.0);
        }
    }
}

TEST_CASE("every mock completion parses cleanly") {
    std::mt19937_64 gen(1);
    const auto pair = golden_fixture_pair();
    PromptPattern decision_pattern{PatternVariant::MultiAttr, std::nullopt, std::nullopt};
    PromptPattern score_pattern{PatternVariant::MultiSim, std::nullopt, std::nullopt};
    auto decision_prompt = render(decision_pattern, pair);
    auto score_prompt = render(score_pattern, pair);
    for (int i = 0; i < 10000; ++i) {
        // Vary the prompt content so each draw sees a fresh digest.
        decision_prompt.user.push_back('x');
        score_prompt.user.push_back('x');
        const bool truth = gen() % 2 == 0;
        const double error_rate = static_cast<double>(gen() % 100) / 100.0;
        auto decided = parse_decision(
            mock_complete(decision_prompt, truth, error_rate, 7).text);
        CHECK(decided.decision != Decision::Unknown);
        auto scored = parse_similarity(
            mock_complete(score_prompt, truth, error_rate, 7).text);
        CHECK(scored.similarity.has_value());
    }
}

} // TEST_SUITE
