#include "erprompt/parse.hpp"

#include <cctype>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "erprompt/errors.hpp"

namespace erprompt {

namespace {

std::string lowercase(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
        text.remove_prefix(1);
    }
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
        text.remove_suffix(1);
    }
    return text;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

// Position past `marker` on its first case-insensitive occurrence, or npos.
std::size_t find_marker(const std::string& lower_text, std::string_view marker) {
    std::size_t at = lower_text.find(marker);
    return at == std::string::npos ? std::string::npos : at + marker.size();
}

std::string_view strip_trailing_punct(std::string_view token) {
    while (!token.empty()) {
        char c = token.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
            token.remove_suffix(1);
        } else {
            break;
        }
    }
    return token;
}

std::optional<bool> yes_no(std::string_view token) {
    std::string word = lowercase(strip_trailing_punct(trim(token)));
    if (word == "yes") return true;
    if (word == "no") return false;
    return std::nullopt;
}

// Rule 1: a line starting with "ANSWER:", any case.
std::optional<bool> answer_line(std::string_view text) {
    for (auto line : split_lines(text)) {
        auto trimmed = trim(line);
        if (trimmed.size() < 7) continue;
        if (lowercase(trimmed.substr(0, 7)) != "answer:") continue;
        // Only the first token after the colon counts; the rest of the
        // line may repeat the instruction wording.
        auto value = trim(trimmed.substr(7));
        auto space = value.find_first_of(" \t");
        if (space != std::string_view::npos) value = value.substr(0, space);
        if (auto verdict = yes_no(value)) return verdict;
    }
    return std::nullopt;
}

// Rule 2: first token of the first non-empty line.
std::optional<bool> leading_token(std::string_view text) {
    for (auto line : split_lines(text)) {
        auto trimmed = trim(line);
        if (trimmed.empty()) continue;
        auto space = trimmed.find_first_of(" \t");
        auto token = space == std::string_view::npos ? trimmed : trimmed.substr(0, space);
        return yes_no(token);
    }
    return std::nullopt;
}

// Rule 3: phrase scan over the first sentence, negation before affirmation.
std::optional<bool> first_sentence_scan(const std::string& lower_text) {
    std::size_t end = lower_text.find_first_of(".!?");
    std::string sentence = end == std::string::npos ? lower_text
                                                    : lower_text.substr(0, end + 1);
    static const char* negations[] = {"not identical", "not the same", "non-duplicate",
                                      "different product"};
    for (const char* phrase : negations) {
        if (sentence.find(phrase) != std::string::npos) return false;
    }
    static const char* affirmations[] = {"identical", "duplicate", "same product"};
    for (const char* phrase : affirmations) {
        if (sentence.find(phrase) != std::string::npos) return true;
    }
    return std::nullopt;
}

bool contains_negation_phrase(const std::string& lower_text) {
    return lower_text.find("not identical") != std::string::npos ||
           lower_text.find("not the same") != std::string::npos;
}

std::string extract_explanation(const std::string& text, const std::string& lower_text) {
    std::size_t at = find_marker(lower_text, "reason:");
    if (at == std::string::npos) return text;
    std::string after = text.substr(at);
    std::string lower_after = lower_text.substr(at);
    // Cut the trailing CONFIDENCE line out of the explanation when present.
    std::size_t confidence = lower_after.find("\nconfidence:");
    if (confidence != std::string::npos) after = after.substr(0, confidence);
    return std::string(trim(after));
}

std::optional<std::string> extract_confidence(const std::string& text,
                                              const std::string& lower_text) {
    std::size_t at = find_marker(lower_text, "confidence:");
    if (at == std::string::npos) return std::nullopt;
    std::string after = text.substr(at);
    std::size_t newline = after.find('\n');
    if (newline != std::string::npos) after = after.substr(0, newline);
    auto value = trim(after);
    if (value.empty()) return std::nullopt;
    return std::string(value);
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// First standalone number in [0,1]; numbers glued to words ("4.00GHz",
// "Z370M") or to other numbers ("1.2.3") do not count.
std::optional<double> first_standalone_unit_decimal(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            ++i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
        bool standalone = true;
        if (start > 0) {
            char before = text[start - 1];
            if (is_word_char(before) || before == '.' || before == '-') standalone = false;
        }
        if (i < text.size()) {
            char after = text[i];
            if (is_word_char(after) || (after == '.' && i + 1 < text.size() &&
                                        std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
                standalone = false;
            }
        }
        if (standalone) {
            double value = std::strtod(text.c_str() + start, nullptr);
            if (value >= 0.0 && value <= 1.0) return value;
        }
    }
    return std::nullopt;
}

std::optional<double> number_after(const std::string& text, std::size_t from) {
    for (std::size_t i = from; i < text.size(); ++i) {
        char c = text[i];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
            char* end = nullptr;
            double value = std::strtod(text.c_str() + i, &end);
            if (end == text.c_str() + i) continue;
            return value;
        }
        if (c == '\n') break; // the score is expected on the SCORE line
    }
    return std::nullopt;
}

} // namespace

std::string decision_name(Decision decision) {
    switch (decision) {
    case Decision::Match: return "match";
    case Decision::NonMatch: return "non-match";
    case Decision::Unknown: return "unknown";
    }
    return "unknown";
}

Decision decision_from_name(const std::string& name) {
    if (name == "match") return Decision::Match;
    if (name == "non-match") return Decision::NonMatch;
    if (name == "unknown") return Decision::Unknown;
    throw FormatError("unknown decision name '" + name + "'");
}

MatchJudgment parse_decision(const std::string& text) {
    MatchJudgment judgment;
    judgment.raw = text;
    const std::string lower = lowercase(text);

    std::optional<bool> verdict = answer_line(text);
    if (!verdict.has_value()) verdict = leading_token(text);
    if (!verdict.has_value()) verdict = first_sentence_scan(lower);

    if (verdict.has_value()) {
        // Negation safety: an explicit negation phrase anywhere in the reply
        // overrides an affirmative verdict.
        if (*verdict && contains_negation_phrase(lower)) verdict = false;
        judgment.decision = *verdict ? Decision::Match : Decision::NonMatch;
    }
    judgment.explanation = extract_explanation(text, lower);
    judgment.confidence = extract_confidence(text, lower);
    return judgment;
}

MatchJudgment parse_similarity(const std::string& text) {
    MatchJudgment judgment;
    judgment.raw = text;
    const std::string lower = lowercase(text);

    std::optional<double> score;
    std::size_t at = find_marker(lower, "score:");
    if (at != std::string::npos) {
        score = number_after(text, at);
    } else {
        score = first_standalone_unit_decimal(text);
    }
    if (score.has_value() && *score >= 0.0 && *score <= 1.0) {
        judgment.similarity = *score;
    }
    judgment.explanation = extract_explanation(text, lower);
    judgment.confidence = extract_confidence(text, lower);
    return judgment;
}

} // namespace erprompt
