#include "erprompt/prompt.hpp"

#include <json.hpp>

#include "erprompt/errors.hpp"

namespace erprompt {

namespace {

constexpr const char* kPersona =
    "You are an expert on product classification. Use your knowledge of products "
    "from multiple domains, such as software, computer hardware, and consumer "
    "electronics, to resolve whether two product records refer to the same "
    "real-world product.";

constexpr const char* kDecisionInstruction =
    "Task: decide whether Record 1 and Record 2 refer to identical products, "
    "considering the similarities and differences between them.";

constexpr const char* kDecisionFormat =
    "Reply in exactly this format, starting with the ANSWER line:\n"
    "ANSWER: <yes or no>\n"
    "REASON: <short explanation for the decision>\n"
    "CONFIDENCE: <high, medium, or low>";

constexpr const char* kSimilarityInstruction =
    "Task: rate Record 1 and Record 2 with a similarity score ranging from 0 to 1, "
    "where 1 means both records refer to an identical product. Judge the similarity "
    "yourself; do not assume any specific similarity metric.";

constexpr const char* kSimilarityFormat =
    "Reply in exactly this format, starting with the SCORE line:\n"
    "SCORE: <number between 0 and 1>\n"
    "REASON: <short explanation for the score>";

std::string record_block(int number, const std::string& serialized) {
    return "Record " + std::to_string(number) + ":\n" + serialized;
}

std::string demonstrations_block(const DemonstrationSet& demos) {
    std::string out;
    for (const auto& demo : demos.demos) {
        if (!demo.label.has_value()) {
            throw ConfigError("few-shot demonstration pair has no label");
        }
        out += "Example:\n";
        out += record_block(1, serialize_concat(demo.left)) + "\n";
        out += record_block(2, serialize_concat(demo.right)) + "\n";
        out += std::string("ANSWER: ") + (*demo.label ? "yes" : "no") + "\n\n";
    }
    return out;
}

void check_demonstrations(const PromptPattern& pattern) {
    if (!pattern.demonstrations.has_value()) {
        throw ConfigError("few-shot pattern needs a demonstration set");
    }
    const auto& demos = pattern.demonstrations->demos;
    std::size_t dups = 0;
    for (const auto& demo : demos) {
        if (demo.label.value_or(false)) ++dups;
    }
    if (demos.size() != 3 || dups != 2) {
        throw ConfigError("few-shot demonstrations must be 2 duplicates + 1 "
                          "non-duplicate; got " + std::to_string(dups) + " of " +
                          std::to_string(demos.size()));
    }
}

} // namespace

std::string pattern_id(PatternVariant variant) {
    switch (variant) {
    case PatternVariant::SingleAttr: return "single-attr";
    case PatternVariant::MultiAttr: return "multi-attr";
    case PatternVariant::NoPersona: return "no-persona";
    case PatternVariant::MultiJson: return "multi-json";
    case PatternVariant::MultiSim: return "multi-sim";
    case PatternVariant::FewShot: return "few-shot";
    }
    throw ConfigError("unknown pattern variant");
}

PatternVariant pattern_from_id(const std::string& id) {
    for (auto variant : all_pattern_variants()) {
        if (pattern_id(variant) == id) return variant;
    }
    throw ConfigError("unknown pattern id '" + id + "'");
}

const std::vector<PatternVariant>& all_pattern_variants() {
    static const std::vector<PatternVariant> order = {
        PatternVariant::MultiAttr, PatternVariant::SingleAttr,
        PatternVariant::MultiJson, PatternVariant::FewShot,
        PatternVariant::MultiSim,  PatternVariant::NoPersona,
    };
    return order;
}

std::string persona_text() {
    return kPersona;
}

std::string serialize_concat(const EntityProfile& profile) {
    std::string out;
    bool first = true;
    for (const auto& [name, value] : profile.attributes) {
        if (!first) out.push_back('\n');
        first = false;
        out += name + ": " + value.value_or("N/A");
    }
    return out;
}

std::string serialize_concat_single(const EntityProfile& profile,
                                    const std::string& attribute) {
    const auto* value = profile.find(attribute);
    if (value == nullptr) {
        throw ConfigError("profile '" + profile.id + "' has no attribute '" +
                          attribute + "'");
    }
    return attribute + ": " + value->value_or("N/A");
}

std::string serialize_json(const EntityProfile& profile) {
    nlohmann::ordered_json object = nlohmann::ordered_json::object();
    for (const auto& [name, value] : profile.attributes) {
        if (value.has_value()) object[name] = *value;
        else object[name] = nullptr;
    }
    return object.dump(2);
}

RenderedPrompt render(const PromptPattern& pattern, const CandidatePair& pair) {
    RenderedPrompt prompt;
    prompt.pattern_id = pattern_id(pattern.variant);
    prompt.expects = pattern.variant == PatternVariant::MultiSim
                         ? ReplyKind::SimilarityScore
                         : ReplyKind::Decision;
    if (pattern.variant != PatternVariant::NoPersona) prompt.system = persona_text();

    auto serialize = [&](const EntityProfile& profile) -> std::string {
        switch (pattern.variant) {
        case PatternVariant::SingleAttr:
            if (!pattern.primary_attribute.has_value()) {
                throw ConfigError("single-attr pattern needs a primary attribute");
            }
            return serialize_concat_single(profile, *pattern.primary_attribute);
        case PatternVariant::MultiJson:
            return serialize_json(profile);
        default:
            return serialize_concat(profile);
        }
    };

    std::string user;
    if (pattern.variant == PatternVariant::FewShot) {
        check_demonstrations(pattern);
        user += demonstrations_block(*pattern.demonstrations);
    }
    user += record_block(1, serialize(pair.left)) + "\n\n";
    user += record_block(2, serialize(pair.right)) + "\n\n";
    if (pattern.variant == PatternVariant::MultiSim) {
        user += std::string(kSimilarityInstruction) + "\n\n" + kSimilarityFormat;
    } else {
        user += std::string(kDecisionInstruction) + "\n\n" + kDecisionFormat;
    }
    prompt.user = std::move(user);
    return prompt;
}

std::size_t user_char_length(const PromptPattern& pattern, const CandidatePair& pair) {
    return render(pattern, pair).user.size();
}

} // namespace erprompt
