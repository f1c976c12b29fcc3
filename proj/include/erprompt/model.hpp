#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace erprompt {

/// One record to be matched: a unique id plus an ordered attribute map.
/// Attribute order is the collection's schema order and is preserved by
/// every serializer. A missing value (std::nullopt) is distinct from an
/// empty string; renderers print "N/A" for missing.
struct EntityProfile {
    std::string id;
    std::string source;
    std::vector<std::pair<std::string, std::optional<std::string>>> attributes;

    /// Returns the value slot for `name`, or nullptr when the attribute
    /// is not part of this profile at all.
    const std::optional<std::string>* find(std::string_view name) const;

    bool operator==(const EntityProfile&) const = default;
};

/// A named set of entity profiles sharing one schema.
struct EntityCollection {
    std::string name;
    std::vector<std::string> schema;
    std::vector<EntityProfile> profiles;

    bool operator==(const EntityCollection&) const = default;
};

/// Two profiles to be judged, with the ground-truth label when known
/// (true = duplicate).
struct CandidatePair {
    EntityProfile left;
    EntityProfile right;
    std::optional<bool> label;

    bool operator==(const CandidatePair&) const = default;
};

/// Decoding configuration sent with every chat completion.
struct DecodingParams {
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 512;

    bool operator==(const DecodingParams&) const = default;
};

/// Content hash identifying one (pattern, model, params, pair) judgment.
/// 64 lowercase hex characters; SHA-256 over the canonical serialization
/// (see pair_key). Order-sensitive: swapping left/right changes the digest.
struct PairKey {
    std::string digest;

    bool operator==(const PairKey&) const = default;
};

/// Trims surrounding whitespace of every attribute value and collapses
/// internal whitespace runs to single spaces. Case and punctuation are
/// data and stay untouched; missing values remain missing. Idempotent.
EntityProfile canonicalize(const EntityProfile& profile);

/// Whitespace normalization used by canonicalize, exposed for reuse.
std::string normalize_whitespace(std::string_view text);

/// Content digest over pattern id, model id, decoding parameters and both
/// profiles. Stable across platforms and process restarts.
PairKey pair_key(const std::string& pattern_id, const std::string& model_id,
                 const DecodingParams& params, const CandidatePair& pair);

/// Content digest over the two profiles only (no pattern/model scope).
/// Used for demonstration/evaluation disjointness checks.
std::string pair_content_digest(const CandidatePair& pair);

/// Lowercase hex SHA-256 of `data` (64 characters).
std::string sha256_hex(std::string_view data);

/// Shortest round-trip decimal form of a double ("0.7", "0", "1e-300").
/// Locale-independent; used wherever doubles enter canonical serializations.
std::string canonical_double(double value);

} // namespace erprompt
