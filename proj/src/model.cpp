#include "pmcts/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "pmcts/errors.hpp"

namespace pmcts {

using json = nlohmann::json;

std::string_view role_name(Role role) {
    switch (role) {
        case Role::System:
            return "system";
        case Role::User:
            return "user";
        case Role::Assistant:
            return "assistant";
    }
    return "user";
}

const std::string& GenerationRequest::final_user_message() const {
    if (messages.empty()) {
        throw DomainError("request has no messages");
    }
    return messages.back().content;
}

void validate(const GenerationRequest& request) {
    if (request.messages.empty()) {
        throw DomainError("request has no messages");
    }
    if (request.messages.back().role != Role::User) {
        throw DomainError("last message of a request must be a user turn");
    }
    if (!(request.temperature >= 0.0)) {
        throw DomainError("temperature must be >= 0");
    }
    if (request.max_tokens < 1) {
        throw DomainError("max_tokens must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// Cache keys

std::string CacheKey::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest.size() * 2);
    for (std::uint8_t byte : digest) {
        out.push_back(kDigits[byte >> 4]);
        out.push_back(kDigits[byte & 0x0f]);
    }
    return out;
}

std::optional<CacheKey> CacheKey::from_hex(std::string_view hex) {
    if (hex.size() != 64) {
        return std::nullopt;
    }
    auto nibble = [](char ch) -> int {
        if (ch >= '0' && ch <= '9') return ch - '0';
        if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
        return -1;
    };
    CacheKey key;
    for (std::size_t i = 0; i < key.digest.size(); ++i) {
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        key.digest[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return key;
}

std::string canonical_serialization(const GenerationRequest& request) {
    // nlohmann::json objects keep keys sorted and print doubles in shortest
    // round-trip form, so the dump is the same on every platform.
    json doc;
    doc["model"] = request.model_name;
    doc["temperature"] = request.temperature;
    doc["max_tokens"] = request.max_tokens;
    doc["seed_tag"] = request.seed_tag;
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back(json::array({std::string(role_name(m.role)), m.content}));
    }
    doc["messages"] = std::move(messages);
    return doc.dump();
}

CacheKey cache_key(const GenerationRequest& request) {
    const std::string bytes = canonical_serialization(request);
    CacheKey key;
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), key.digest.data(), &length, EVP_sha256(), nullptr) != 1 ||
        length != key.digest.size()) {
        throw Error("sha256 digest failed");
    }
    return key;
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    load();
}

void ResponseCache::load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        return;
    }
    std::string header;
    while (std::getline(in, header)) {
        if (header.empty()) {
            continue;
        }
        const auto space = header.find(' ');
        std::optional<CacheKey> key;
        std::size_t length = 0;
        bool ok = space != std::string::npos;
        if (ok) {
            key = CacheKey::from_hex(std::string_view(header).substr(0, space));
            const std::string digits = header.substr(space + 1);
            ok = key.has_value() && !digits.empty() &&
                 digits.find_first_not_of("0123456789") == std::string::npos && digits.size() < 19;
            if (ok) {
                length = std::stoull(digits);
            }
        }
        if (!ok) {
            ++corrupted_;
            std::cerr << "warning: skipping corrupted cache record in " << path_ << '\n';
            continue;
        }
        std::string content(length, '\0');
        in.read(content.data(), static_cast<std::streamsize>(length));
        const bool complete = static_cast<std::size_t>(in.gcount()) == length;
        const int terminator = complete ? in.get() : EOF;
        if (!complete || terminator != '\n') {
            ++corrupted_;
            std::cerr << "warning: truncated cache record in " << path_ << '\n';
            break;
        }
        index_[*key] = std::move(content);
    }
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) const {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void ResponseCache::put(const CacheKey& key, const std::string& content) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error("cannot open cache file " + path_.string());
    }
    out << key.hex() << ' ' << content.size() << '\n';
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out << '\n';
    out.flush();
    index_[key] = content;
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return index_.size();
}

// ---------------------------------------------------------------------------
// CachingModel

CachingModel::CachingModel(std::shared_ptr<Model> backend, std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {}

GenerationResponse CachingModel::generate(const GenerationRequest& request) {
    validate(request);
    const CacheKey key = cache_key(request);
    if (auto hit = cache_->get(key)) {
        return GenerationResponse{std::move(*hit), true, 0};
    }

    // Concurrent misses on one key wait for the first backend call.
    std::shared_ptr<std::mutex> key_lock;
    {
        std::lock_guard lock(key_mutex_);
        auto& slot = key_locks_[key];
        if (!slot) {
            slot = std::make_shared<std::mutex>();
        }
        key_lock = slot;
    }
    std::lock_guard per_key(*key_lock);
    if (auto hit = cache_->get(key)) {
        return GenerationResponse{std::move(*hit), true, 0};
    }
    GenerationResponse response = backend_->generate(request);
    backend_calls_.fetch_add(1);
    cache_->put(key, response.content);
    response.cached = false;
    return response;
}

// ---------------------------------------------------------------------------
// HttpModel

HttpModel::HttpModel(HttpModelOptions options)
    : HttpModel(std::move(options), httplib_post,
                [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

HttpModel::HttpModel(HttpModelOptions options, HttpTransport transport,
                     std::function<void(std::chrono::milliseconds)> sleep)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      slots_(std::clamp(options_.connection_limit, 1, 1024)) {
    if (options_.endpoint.empty()) {
        throw ConfigError("model endpoint is not configured");
    }
    if (options_.max_attempts < 1) {
        options_.max_attempts = 1;
    }
}

std::string HttpModel::encode_request(const GenerationRequest& request) {
    json body;
    body["model"] = request.model_name;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    return body.dump();
}

std::string HttpModel::decode_reply(const std::string& body) {
    const json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) {
        throw ProtocolError("response body is not JSON");
    }
    try {
        const json& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) {
            throw ProtocolError("choices[0].message.content is not a string");
        }
        return content.get<std::string>();
    } catch (const json::exception&) {
        throw ProtocolError("response lacks choices[0].message.content");
    }
}

GenerationResponse HttpModel::generate(const GenerationRequest& request) {
    validate(request);
    const std::string body = encode_request(request);
    std::vector<std::pair<std::string, std::string>> headers;
    if (!options_.api_key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + options_.api_key);
    }

    const auto start = std::chrono::steady_clock::now();
    HttpReply reply;
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
        if (attempt > 0) {
            sleep_(options_.backoff_base * (1 << (attempt - 1)));
        }
        slots_.acquire();
        try {
            reply = transport_(options_.endpoint, body, headers, options_.timeout);
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();

        if (reply.status >= 200 && reply.status < 300) {
            const auto elapsed = std::chrono::steady_clock::now() - start;
            return GenerationResponse{decode_reply(reply.body), false,
                                      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()};
        }
        const bool retryable = reply.status == 0 || reply.status == 429 || reply.status >= 500;
        if (!retryable) {
            break;
        }
    }
    throw TransportError("model backend failed with status " + std::to_string(reply.status), reply.status);
}

// ---------------------------------------------------------------------------
// ScriptedModel

ScriptedModel::ScriptedModel(std::vector<ScriptEntry> script)
    : script_(std::move(script)), consumed_(script_.size(), false) {
    if (script_.empty()) {
        throw DomainError("script must not be empty");
    }
}

GenerationResponse ScriptedModel::generate(const GenerationRequest& request) {
    validate(request);
    const std::string& prompt = request.final_user_message();
    std::lock_guard lock(mutex_);
    ++calls_;
    for (std::size_t i = 0; i < script_.size(); ++i) {
        if (consumed_[i] || prompt.find(script_[i].matcher) == std::string::npos) {
            continue;
        }
        if (script_[i].once) {
            consumed_[i] = true;
        }
        return GenerationResponse{script_[i].reply, false, 0};
    }
    constexpr std::size_t kExcerpt = 240;
    throw ScriptMissError("no script entry matches prompt: " +
                          (prompt.size() > kExcerpt ? prompt.substr(0, kExcerpt) + "..." : prompt));
}

std::size_t ScriptedModel::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::vector<ScriptEntry> ScriptedModel::load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read script file " + path.string());
    }
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw ConfigError("script file " + path.string() + " must hold a JSON array");
    }
    std::vector<ScriptEntry> script;
    for (const json& entry : doc) {
        if (!entry.is_object() || !entry.contains("match") || !entry.contains("reply") ||
            !entry["match"].is_string() || !entry["reply"].is_string()) {
            throw ConfigError("script entries need string fields 'match' and 'reply'");
        }
        ScriptEntry e;
        e.matcher = entry["match"].get<std::string>();
        e.reply = entry["reply"].get<std::string>();
        e.once = entry.value("once", false);
        script.push_back(std::move(e));
    }
    return script;
}

std::shared_ptr<Model> scripted_model(std::vector<ScriptEntry> script) {
    return std::make_shared<ScriptedModel>(std::move(script));
}

}  // namespace pmcts
