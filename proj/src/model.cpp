#include "erprompt/model.hpp"

#include <charconv>
#include <cctype>

#include <openssl/evp.h>

namespace erprompt {

const std::optional<std::string>* EntityProfile::find(std::string_view name) const {
    for (const auto& [key, value] : attributes) {
        if (key == name) return &value;
    }
    return nullptr;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    bool seen_content = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = seen_content;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c));
        seen_content = true;
    }
    return out;
}

EntityProfile canonicalize(const EntityProfile& profile) {
    EntityProfile out = profile;
    for (auto& [name, value] : out.attributes) {
        if (value.has_value()) value = normalize_whitespace(*value);
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::string canonical_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

// Length-prefixed field framing so concatenated fields cannot collide.
void append_field(std::string& out, std::string_view field) {
    out += std::to_string(field.size());
    out.push_back(':');
    out += field;
    out.push_back(';');
}

void append_profile(std::string& out, const EntityProfile& profile) {
    append_field(out, profile.id);
    append_field(out, profile.source);
    append_field(out, std::to_string(profile.attributes.size()));
    for (const auto& [name, value] : profile.attributes) {
        append_field(out, name);
        if (value.has_value()) {
            out.push_back('1');
            append_field(out, *value);
        } else {
            out.push_back('0');
            out.push_back(';');
        }
    }
}

} // namespace

PairKey pair_key(const std::string& pattern_id, const std::string& model_id,
                 const DecodingParams& params, const CandidatePair& pair) {
    std::string canon;
    canon.reserve(512);
    append_field(canon, pattern_id);
    append_field(canon, model_id);
    append_field(canon, canonical_double(params.temperature));
    append_field(canon, std::to_string(params.max_output_tokens));
    append_profile(canon, pair.left);
    append_profile(canon, pair.right);
    return PairKey{sha256_hex(canon)};
}

std::string pair_content_digest(const CandidatePair& pair) {
    std::string canon;
    canon.reserve(256);
    append_profile(canon, pair.left);
    append_profile(canon, pair.right);
    return sha256_hex(canon);
}

} // namespace erprompt
