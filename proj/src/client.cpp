#include "erprompt/client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "erprompt/errors.hpp"

namespace erprompt {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void append_field(std::string& out, std::string_view field) {
    out += std::to_string(field.size());
    out.push_back(':');
    out += field;
    out.push_back(';');
}

// First 8 digest bytes of sha256(tag) as an integer, for seeding draws.
std::uint64_t digest_u64(const std::string& tag) {
    std::string hex = sha256_hex(tag);
    std::uint64_t value = 0;
    for (int i = 0; i < 16; ++i) {
        char c = hex[static_cast<std::size_t>(i)];
        value = (value << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return value;
}

double unit_uniform(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string request_body_json(const RenderedPrompt& prompt, const DecodingParams& params) {
    ordered_json body = ordered_json::object();
    body["model"] = params.model_id;
    ordered_json messages = ordered_json::array();
    if (prompt.system.has_value()) {
        messages.push_back({{"role", "system"}, {"content", *prompt.system}});
    }
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    body["messages"] = std::move(messages);
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_output_tokens;
    return body.dump();
}

CompletionResult parse_completion_body(const std::string& body,
                                       const RenderedPrompt& prompt) {
    json parsed;
    try {
        parsed = json::parse(body);
    } catch (const json::exception&) {
        throw RequestError("endpoint returned unparseable JSON");
    }
    CompletionResult result;
    try {
        result.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw RequestError("endpoint response has no choices[0].message.content");
    }
    if (result.text.empty()) {
        throw EmptyResponseError("endpoint returned an empty completion");
    }
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        result.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", std::int64_t{0});
        result.usage.completion_tokens = parsed["usage"].value("completion_tokens", std::int64_t{0});
    } else {
        result.usage.prompt_tokens =
            estimate_tokens(prompt.system.value_or("")) + estimate_tokens(prompt.user);
        result.usage.completion_tokens = estimate_tokens(result.text);
    }
    return result;
}

class HttplibTransport : public ChatTransport {
public:
    HttplibTransport(std::string base_url, std::string api_key) : api_key_(std::move(api_key)) {
        auto scheme_end = base_url.find("://");
        std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = base_url.find('/', host_start);
        if (path_start == std::string::npos) {
            origin_ = base_url;
        } else {
            origin_ = base_url.substr(0, path_start);
            path_prefix_ = base_url.substr(path_start);
        }
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
        client_ = std::make_unique<httplib::Client>(origin_);
        client_->set_connection_timeout(30, 0);
        client_->set_read_timeout(300, 0);
        client_->set_write_timeout(60, 0);
    }

    WireResponse post_chat(const std::string& request_body) override {
        httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
        auto response = client_->Post(path_prefix_ + "/chat/completions", headers,
                                      request_body, "application/json");
        if (!response) {
            return {0, httplib::to_string(response.error())};
        }
        return {response->status, response->body};
    }

private:
    std::string api_key_;
    std::string origin_;
    std::string path_prefix_;
    std::unique_ptr<httplib::Client> client_;
};

} // namespace

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

double estimate_cost(const TokenUsage& usage, const PriceTable& prices) {
    return static_cast<double>(usage.prompt_tokens) / 1000.0 * prices.usd_per_1k_prompt_tokens +
           static_cast<double>(usage.completion_tokens) / 1000.0 *
               prices.usd_per_1k_completion_tokens;
}

std::string prompt_digest(const RenderedPrompt& prompt) {
    std::string canon;
    canon.reserve(prompt.user.size() + 64);
    append_field(canon, prompt.pattern_id);
    canon.push_back(prompt.system.has_value() ? '1' : '0');
    if (prompt.system.has_value()) append_field(canon, *prompt.system);
    append_field(canon, prompt.user);
    return sha256_hex(canon);
}

std::string cache_key(const RenderedPrompt& prompt, const DecodingParams& params) {
    std::string canon;
    canon.reserve(prompt.user.size() + 128);
    append_field(canon, prompt.pattern_id);
    append_field(canon, params.model_id);
    append_field(canon, canonical_double(params.temperature));
    append_field(canon, std::to_string(params.max_output_tokens));
    canon.push_back(prompt.system.has_value() ? '1' : '0');
    if (prompt.system.has_value()) append_field(canon, *prompt.system);
    append_field(canon, prompt.user);
    return sha256_hex(canon);
}

CompletionResult mock_complete(const RenderedPrompt& prompt, std::optional<bool> truth,
                               double error_rate, std::uint64_t seed) {
    if (!truth.has_value()) {
        throw ConfigError("mock completion needs the pair's ground-truth label");
    }
    const std::string digest = prompt_digest(prompt);
    const std::string tag = digest + ":" + std::to_string(seed);
    const bool flip = unit_uniform(digest_u64(tag + ":flip")) < error_rate;
    const bool answer = flip ? !*truth : *truth;

    CompletionResult result;
    if (prompt.expects == ReplyKind::SimilarityScore) {
        double band = 0.2 * unit_uniform(digest_u64(tag + ":score"));
        double score = answer ? 0.8 + band : band;
        result.text = "SCORE: " + canonical_double(score) + "\nREASON: mock";
    } else {
        result.text = std::string("ANSWER: ") + (answer ? "yes" : "no") +
                      "\nREASON: mock\nCONFIDENCE: high";
    }
    result.usage.prompt_tokens =
        estimate_tokens(prompt.system.value_or("")) + estimate_tokens(prompt.user);
    result.usage.completion_tokens = estimate_tokens(result.text);
    return result;
}

std::unique_ptr<ChatTransport> make_http_transport(std::optional<std::string> base_url,
                                                   std::optional<std::string> api_key) {
    if (!base_url.has_value()) {
        if (const char* env = std::getenv("ERPROMPT_BASE_URL")) base_url = env;
    }
    if (!api_key.has_value()) {
        if (const char* env = std::getenv("ERPROMPT_API_KEY")) api_key = env;
    }
    if (!base_url.has_value() || base_url->empty()) {
        throw ConfigError("no endpoint configured: set ERPROMPT_BASE_URL");
    }
    if (!api_key.has_value() || api_key->empty()) {
        throw ConfigError("no credential configured: set ERPROMPT_API_KEY");
    }
    return std::make_unique<HttplibTransport>(*base_url, *api_key);
}

LlmClient::LlmClient(std::shared_ptr<ChatTransport> transport, RetryPolicy retry,
                     RateLimit rate, Sleeper sleeper)
    : transport_(std::move(transport)),
      retry_(retry),
      rate_(rate),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      bucket_tokens_(std::max(rate.requests_per_minute, 0.0)),
      bucket_refill_(std::chrono::steady_clock::now()) {}

void LlmClient::acquire_rate_token() {
    if (rate_.requests_per_minute <= 0.0) return;
    const double per_ms = rate_.requests_per_minute / 60000.0;
    std::chrono::milliseconds wait{0};
    {
        std::lock_guard lock(rate_mutex_);
        auto now = std::chrono::steady_clock::now();
        double elapsed_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - bucket_refill_).count();
        bucket_tokens_ = std::min(rate_.requests_per_minute, bucket_tokens_ + elapsed_ms * per_ms);
        bucket_refill_ = now;
        if (bucket_tokens_ >= 1.0) {
            bucket_tokens_ -= 1.0;
        } else {
            wait = std::chrono::milliseconds(
                static_cast<std::int64_t>((1.0 - bucket_tokens_) / per_ms) + 1);
            bucket_tokens_ = 0.0;
        }
    }
    if (wait.count() > 0) sleeper_(wait);
}

CompletionResult LlmClient::complete(const RenderedPrompt& prompt, const DecodingParams& params) {
    const std::string body = request_body_json(prompt, params);
    std::mt19937_64 jitter(retry_.jitter_seed ? retry_.jitter_seed : std::random_device{}());
    const auto start = std::chrono::steady_clock::now();

    std::string last_failure;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        acquire_rate_token();
        WireResponse wire = transport_->post_chat(body);
        const bool retryable = wire.status <= 0 || wire.status == 429 ||
                               (wire.status >= 500 && wire.status < 600);
        if (wire.status == 200) {
            CompletionResult result = parse_completion_body(wire.body, prompt);
            result.attempts = attempt;
            result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - start)
                                    .count();
            return result;
        }
        if (!retryable) {
            throw RequestError("endpoint rejected request (HTTP " +
                               std::to_string(wire.status) + "): " + wire.body);
        }
        last_failure = wire.status <= 0 ? "network error: " + wire.body
                                        : "HTTP " + std::to_string(wire.status);
        if (attempt < retry_.max_attempts) {
            double scale = std::pow(retry_.factor, attempt - 1);
            auto cap = std::chrono::milliseconds(
                static_cast<std::int64_t>(retry_.base_delay.count() * scale));
            std::uniform_int_distribution<std::int64_t> dist(0, std::max<std::int64_t>(cap.count(), 0));
            sleeper_(std::chrono::milliseconds(dist(jitter)));
        }
    }
    throw TransportError("gave up after " + std::to_string(retry_.max_attempts) +
                         " attempts; last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// ResponseCache

namespace {

std::string cache_record_key(const CacheRecord& record) {
    RenderedPrompt prompt;
    prompt.pattern_id = record.pattern_id;
    prompt.system = record.system;
    prompt.user = record.user;
    DecodingParams params;
    params.model_id = record.model_id;
    params.temperature = record.temperature;
    params.max_output_tokens = record.max_output_tokens;
    return cache_key(prompt, params);
}

ordered_json cache_record_json(const CacheRecord& record) {
    ordered_json entry = ordered_json::object();
    entry["digest"] = record.digest;
    entry["pattern_id"] = record.pattern_id;
    entry["model_id"] = record.model_id;
    entry["temperature"] = record.temperature;
    entry["max_output_tokens"] = record.max_output_tokens;
    if (record.system.has_value()) entry["system"] = *record.system;
    else entry["system"] = nullptr;
    entry["user"] = record.user;
    entry["text"] = record.text;
    entry["prompt_tokens"] = record.usage.prompt_tokens;
    entry["completion_tokens"] = record.usage.completion_tokens;
    entry["timestamp"] = record.timestamp;
    return entry;
}

CacheRecord cache_record_from_json(const ordered_json& entry) {
    CacheRecord record;
    record.digest = entry.at("digest").get<std::string>();
    record.pattern_id = entry.at("pattern_id").get<std::string>();
    record.model_id = entry.at("model_id").get<std::string>();
    record.temperature = entry.at("temperature").get<double>();
    record.max_output_tokens = entry.at("max_output_tokens").get<int>();
    if (!entry.at("system").is_null()) record.system = entry.at("system").get<std::string>();
    record.user = entry.at("user").get<std::string>();
    record.text = entry.at("text").get<std::string>();
    record.usage.prompt_tokens = entry.at("prompt_tokens").get<std::int64_t>();
    record.usage.completion_tokens = entry.at("completion_tokens").get<std::int64_t>();
    record.timestamp = entry.value("timestamp", "");
    return record;
}

} // namespace

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
    load();
}

void ResponseCache::load() {
    std::ifstream in(file_, std::ios::binary);
    if (!in) return; // a fresh cache file is created on first append
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        CacheRecord record;
        try {
            record = cache_record_from_json(ordered_json::parse(line));
        } catch (const nlohmann::json::exception&) {
            throw CacheError(file_.string() + ": malformed cache record on line " +
                             std::to_string(line_no));
        }
        if (cache_record_key(record) != record.digest) {
            throw CacheError(file_.string() + ": digest mismatch for cache record " +
                             record.digest);
        }
        records_[record.digest] = std::move(record);
    }
}

std::optional<CompletionResult> ResponseCache::lookup(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    CompletionResult result;
    result.text = it->second.text;
    result.usage = it->second.usage;
    result.cached = true;
    return result;
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

void ResponseCache::append_locked(const CacheRecord& record) {
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) throw CacheError("cannot append to cache file: " + file_.string());
    out << cache_record_json(record).dump() << '\n';
    out.flush();
    records_[record.digest] = record;
}

CompletionResult ResponseCache::get_or_fetch(const RenderedPrompt& prompt,
                                             const DecodingParams& params,
                                             const Fetcher& fetch) {
    const std::string key = cache_key(prompt, params);
    std::shared_ptr<std::mutex> key_mutex;
    {
        std::lock_guard lock(mutex_);
        auto it = records_.find(key);
        if (it != records_.end()) {
            CompletionResult hit;
            hit.text = it->second.text;
            hit.usage = it->second.usage;
            hit.cached = true;
            return hit;
        }
        auto& slot = in_flight_[key];
        if (!slot) slot = std::make_shared<std::mutex>();
        key_mutex = slot;
    }
    // Per-key serialization: only the first arrival fetches, later arrivals
    // find the record already stored.
    std::lock_guard key_lock(*key_mutex);
    if (auto hit = lookup(key)) return *hit;

    CompletionResult fetched = fetch();
    CacheRecord record;
    record.digest = key;
    record.pattern_id = prompt.pattern_id;
    record.model_id = params.model_id;
    record.temperature = params.temperature;
    record.max_output_tokens = params.max_output_tokens;
    record.system = prompt.system;
    record.user = prompt.user;
    record.text = fetched.text;
    record.usage = fetched.usage;
    record.timestamp = utc_timestamp();
    {
        std::lock_guard lock(mutex_);
        append_locked(record);
        in_flight_.erase(key);
    }
    fetched.cached = false;
    return fetched;
}

std::size_t ResponseCache::compact() {
    std::lock_guard lock(mutex_);
    std::size_t kept = records_.size();
    std::size_t on_disk = 0;
    {
        std::ifstream in(file_, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) ++on_disk;
        }
    }
    auto tmp = file_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CacheError("cannot write compacted cache: " + tmp.string());
        for (const auto& [key, record] : records_) {
            out << cache_record_json(record).dump() << '\n';
        }
    }
    std::filesystem::rename(tmp, file_);
    return on_disk > kept ? on_disk - kept : 0;
}

CompletionResult cached_complete(const RenderedPrompt& prompt, const DecodingParams& params,
                                 ResponseCache& cache, const ResponseCache::Fetcher& fetch) {
    return cache.get_or_fetch(prompt, params, fetch);
}

} // namespace erprompt
