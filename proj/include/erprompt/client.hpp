#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "erprompt/model.hpp"
#include "erprompt/prompt.hpp"

namespace erprompt {

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

/// Prices per 1000 tokens, in USD. Always configuration-supplied.
struct PriceTable {
    double usd_per_1k_prompt_tokens = 0.0;
    double usd_per_1k_completion_tokens = 0.0;
};

struct CompletionResult {
    std::string text;
    TokenUsage usage;
    bool cached = false;
    std::int64_t latency_ms = 0;
    int attempts = 1;
};

/// Coarse token count used when the endpoint reports no usage (mock runs):
/// ceil(character count / 4).
std::int64_t estimate_tokens(std::string_view text);

/// Linear token pricing: tokens/1000 x price, prompt and completion summed.
double estimate_cost(const TokenUsage& usage, const PriceTable& prices);

/// Digest identifying a prompt's content (pattern id, system, user).
std::string prompt_digest(const RenderedPrompt& prompt);

/// Cache key: pattern id, model id, decoding parameters and full prompt text.
std::string cache_key(const RenderedPrompt& prompt, const DecodingParams& params);

/// Deterministic offline oracle. Draws per-pair pseudo-randomness from the
/// prompt digest and seed (never from call order), flips the planted truth
/// with probability error_rate, and emits a reply in the mandated format.
/// Similarity scores land in [0.8,1.0] for duplicates and [0.0,0.2] for
/// non-duplicates, so a threshold sweep has an analytic answer.
CompletionResult mock_complete(const RenderedPrompt& prompt,
                               std::optional<bool> truth,
                               double error_rate,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Transport + retry

/// Raw wire exchange with a chat-completions endpoint. status <= 0 encodes a
/// network-level failure described by `body`.
struct WireResponse {
    int status = 0;
    std::string body;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual WireResponse post_chat(const std::string& request_body) = 0;
};

/// HTTPS transport for OpenAI-compatible endpoints. Reads the base URL from
/// ERPROMPT_BASE_URL and the credential from ERPROMPT_API_KEY unless given.
std::unique_ptr<ChatTransport> make_http_transport(
    std::optional<std::string> base_url = std::nullopt,
    std::optional<std::string> api_key = std::nullopt);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    std::uint64_t jitter_seed = 0; // full jitter: uniform in [0, delay]
};

/// Token-bucket rate limit; requests_per_minute <= 0 disables limiting.
struct RateLimit {
    double requests_per_minute = 30.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Chat-completion client: builds the wire request, applies the rate limit,
/// retries 429/5xx/network failures with exponential backoff and full jitter,
/// and parses the first choice plus reported usage.
class LlmClient {
public:
    explicit LlmClient(std::shared_ptr<ChatTransport> transport,
                       RetryPolicy retry = {},
                       RateLimit rate = {},
                       Sleeper sleeper = nullptr);

    CompletionResult complete(const RenderedPrompt& prompt, const DecodingParams& params);

private:
    std::shared_ptr<ChatTransport> transport_;
    RetryPolicy retry_;
    RateLimit rate_;
    Sleeper sleeper_;
    std::mutex rate_mutex_;
    double bucket_tokens_;
    std::chrono::steady_clock::time_point bucket_refill_;

    void acquire_rate_token();
};

// ---------------------------------------------------------------------------
// Response cache

struct CacheRecord {
    std::string digest;
    std::string pattern_id;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 0;
    std::optional<std::string> system;
    std::string user;
    std::string text;
    TokenUsage usage;
    std::string timestamp;
};

/// Append-only newline-delimited JSON cache. Records are verified against
/// their digest on load; hits replay the stored text and original usage.
/// get_or_fetch deduplicates concurrent fetches per key, so each key hits
/// the network at most once.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path file);

    std::optional<CompletionResult> lookup(const std::string& key) const;
    std::size_t size() const;

    using Fetcher = std::function<CompletionResult()>;
    CompletionResult get_or_fetch(const RenderedPrompt& prompt,
                                  const DecodingParams& params,
                                  const Fetcher& fetch);

    /// Rewrites the file with one record per key (last record wins).
    /// Returns the number of dropped duplicates.
    std::size_t compact();

    const std::filesystem::path& path() const { return file_; }

private:
    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, CacheRecord> records_;
    std::map<std::string, std::shared_ptr<std::mutex>> in_flight_;

    void load();
    void append_locked(const CacheRecord& record);
};

/// Cache-through completion: replay a stored response when the key is known,
/// otherwise invoke `fetch` once and append the result.
CompletionResult cached_complete(const RenderedPrompt& prompt,
                                 const DecodingParams& params,
                                 ResponseCache& cache,
                                 const ResponseCache::Fetcher& fetch);

} // namespace erprompt
