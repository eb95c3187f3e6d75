#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace pmcts {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);

struct Message {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct GenerationRequest {
    std::string model_name;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string seed_tag;

    /// Content of the last message; requests always end with a user turn.
    const std::string& final_user_message() const;
};

/// Throws DomainError unless messages are non-empty, end with a user turn,
/// temperature >= 0 and max_tokens >= 1.
void validate(const GenerationRequest& request);

struct GenerationResponse {
    std::string content;
    bool cached = false;
    std::int64_t latency_ms = 0;
};

/// SHA-256 over the canonical serialization of a request.
struct CacheKey {
    std::array<std::uint8_t, 32> digest{};

    std::string hex() const;
    static std::optional<CacheKey> from_hex(std::string_view hex);

    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

/// Stable byte serialization of every field that identifies a request.
std::string canonical_serialization(const GenerationRequest& request);
CacheKey cache_key(const GenerationRequest& request);

/// Anything that turns a request into text. Implementations used from
/// several tasks at once must be internally synchronized.
class Model {
public:
    virtual ~Model() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

/// Append-only persistent response store.
///
/// File layout, repeated per record:
///     <64 hex digest> <decimal byte length>\n<content bytes>\n
/// The whole file is indexed in memory on open; later records for the same
/// key win. Records that fail to parse are skipped and counted.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path path);

    std::optional<std::string> get(const CacheKey& key) const;
    void put(const CacheKey& key, const std::string& content);

    std::size_t size() const;
    std::size_t corrupted_records() const noexcept { return corrupted_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void load();

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<CacheKey, std::string> index_;
    std::size_t corrupted_ = 0;
};

/// Wraps a backend with a ResponseCache. A hit never reaches the backend.
class CachingModel : public Model {
public:
    CachingModel(std::shared_ptr<Model> backend, std::shared_ptr<ResponseCache> cache);

    GenerationResponse generate(const GenerationRequest& request) override;

    std::size_t backend_calls() const noexcept { return backend_calls_.load(); }

private:
    std::shared_ptr<Model> backend_;
    std::shared_ptr<ResponseCache> cache_;
    std::mutex key_mutex_;
    std::map<CacheKey, std::shared_ptr<std::mutex>> key_locks_;
    std::atomic<std::size_t> backend_calls_{0};
};

struct HttpReply {
    int status = 0;  // 0: no response (connection failure)
    std::string body;
};

/// POSTs `body` as JSON to `url` with the given headers.
using HttpTransport = std::function<HttpReply(const std::string& url, const std::string& body,
                                              const std::vector<std::pair<std::string, std::string>>& headers,
                                              std::chrono::seconds timeout)>;

struct HttpModelOptions {
    std::string endpoint;  // full URL of the chat-completions route
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::seconds timeout{60};
    int connection_limit = 4;
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{500};
};

/// Chat-completions client: `model`, `messages`, `temperature`, `max_tokens`
/// out; `choices[0].message.content` back. Retries connection failures, 429
/// and 5xx with exponential backoff.
class HttpModel : public Model {
public:
    explicit HttpModel(HttpModelOptions options);
    HttpModel(HttpModelOptions options, HttpTransport transport,
              std::function<void(std::chrono::milliseconds)> sleep);

    GenerationResponse generate(const GenerationRequest& request) override;

    static std::string encode_request(const GenerationRequest& request);
    /// Throws ProtocolError when the body lacks choices[0].message.content.
    static std::string decode_reply(const std::string& body);

private:
    HttpModelOptions options_;
    HttpTransport transport_;
    std::function<void(std::chrono::milliseconds)> sleep_;
    std::counting_semaphore<1024> slots_;
};

/// Default transport built on cpp-httplib.
HttpReply httplib_post(const std::string& url, const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& headers,
                       std::chrono::seconds timeout);

struct ScriptEntry {
    std::string matcher;  // substring searched in the final user message
    std::string reply;
    bool once = false;    // consumed after its first match
};

/// Deterministic replay model: the first entry whose matcher occurs in the
/// final user message answers. Unmatched prompts raise ScriptMissError.
class ScriptedModel : public Model {
public:
    explicit ScriptedModel(std::vector<ScriptEntry> script);

    GenerationResponse generate(const GenerationRequest& request) override;

    std::size_t calls() const;

    /// Loads a JSON array of {"match": str, "reply": str, "once": bool?}.
    static std::vector<ScriptEntry> load_script(const std::filesystem::path& path);

private:
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    std::size_t calls_ = 0;
};

std::shared_ptr<Model> scripted_model(std::vector<ScriptEntry> script);

}  // namespace pmcts
