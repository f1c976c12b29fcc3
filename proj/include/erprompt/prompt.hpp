#pragma once

#include <optional>
#include <string>

#include "erprompt/ingest.hpp"
#include "erprompt/model.hpp"

namespace erprompt {

/// The six prompt patterns evaluated by the harness.
enum class PatternVariant {
    SingleAttr,
    MultiAttr,
    NoPersona,
    MultiJson,
    MultiSim,
    FewShot,
};

/// What the result-format directive asks the model for.
enum class ReplyKind {
    Decision,
    SimilarityScore,
};

struct PromptPattern {
    PatternVariant variant = PatternVariant::MultiAttr;
    // Required for SingleAttr; must name an attribute of both profiles.
    std::optional<std::string> primary_attribute;
    // Required for FewShot (2 duplicates + 1 non-duplicate).
    std::optional<DemonstrationSet> demonstrations;
};

struct RenderedPrompt {
    std::optional<std::string> system; // persona; absent for NoPersona
    std::string user;
    std::string pattern_id;
    ReplyKind expects = ReplyKind::Decision;
};

/// Canonical pattern id ("single-attr", "multi-attr", ...).
std::string pattern_id(PatternVariant variant);

/// Inverse of pattern_id; throws ConfigError on unknown ids.
PatternVariant pattern_from_id(const std::string& id);

/// All six variants in the reporting order used throughout.
const std::vector<PatternVariant>& all_pattern_variants();

/// The fixed persona paragraph shared by every pattern except no-persona.
/// Byte-stable; committed as a golden fixture.
std::string persona_text();

/// One "<attribute>: <value or N/A>" line per attribute, joined by newlines.
std::string serialize_concat(const EntityProfile& profile);

/// serialize_concat restricted to a single attribute.
/// Throws ConfigError when the profile lacks the attribute.
std::string serialize_concat_single(const EntityProfile& profile,
                                    const std::string& attribute);

/// A JSON object with keys in schema order, two-space indentation,
/// missing values as null, no trailing newline.
std::string serialize_json(const EntityProfile& profile);

/// Renders the pair into the pattern's byte-exact prompt.
RenderedPrompt render(const PromptPattern& pattern, const CandidatePair& pair);

/// Length of the rendered user message in bytes (UTF-8).
std::size_t user_char_length(const PromptPattern& pattern, const CandidatePair& pair);

} // namespace erprompt
