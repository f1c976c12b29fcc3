#pragma once

#include <optional>
#include <string>

namespace erprompt {

enum class Decision {
    Match,
    NonMatch,
    Unknown,
};

std::string decision_name(Decision decision);
Decision decision_from_name(const std::string& name);

/// Structured verdict parsed from one completion. Parsing never throws:
/// anything unparseable encodes as Unknown and is tallied at run level.
struct MatchJudgment {
    Decision decision = Decision::Unknown;
    std::optional<double> similarity;  // multi-sim only, in [0,1]
    std::optional<std::string> confidence;
    std::string explanation;
    std::string raw;
    std::string pattern_id;
    std::string pair_digest;
};

/// Parses a decision-pattern reply. Rule cascade: ANSWER: line, then a
/// leading yes/no token, then first-sentence phrase scanning with negation
/// checked before affirmation, else Unknown. Text containing "not identical"
/// or "not the same" never parses to Match.
MatchJudgment parse_decision(const std::string& text);

/// Parses a multi-sim reply: the first number after "SCORE:" when present,
/// otherwise the first standalone decimal lying in [0,1]. Out-of-range
/// scores are rejected (Unknown), never clamped.
MatchJudgment parse_similarity(const std::string& text);

} // namespace erprompt
