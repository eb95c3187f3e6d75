#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fstream>
#include <thread>

#include <json.hpp>

#include "fixtures.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/model.hpp"

using namespace pmcts;

namespace {

GenerationRequest request_for(std::string user, double temperature = 0.0) {
    GenerationRequest request;
    request.model_name = "glm-4-flash";
    request.messages = {{Role::System, "sys"}, {Role::User, std::move(user)}};
    request.temperature = temperature;
    return request;
}

class CountingModel : public Model {
public:
    GenerationResponse generate(const GenerationRequest& request) override {
        ++calls;
        return {"echo: " + request.final_user_message(), false, 0};
    }
    std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("request validation") {
    GenerationRequest request = request_for("hi");
    CHECK_NOTHROW(validate(request));
    request.temperature = -0.1;
    CHECK_THROWS_AS(validate(request), DomainError);
    request = request_for("hi");
    request.max_tokens = 0;
    CHECK_THROWS_AS(validate(request), DomainError);
    request = request_for("hi");
    request.messages.push_back({Role::Assistant, "x"});
    CHECK_THROWS_AS(validate(request), DomainError);
    request.messages.clear();
    CHECK_THROWS_AS(validate(request), DomainError);
}

TEST_CASE("cache key") {
    const GenerationRequest base = request_for("hi");
    // sha256 of the sorted-key compact JSON, computed with Python hashlib
    CHECK(canonical_serialization(base) ==
          R"({"max_tokens":512,"messages":[["system","sys"],["user","hi"]],"model":"glm-4-flash","seed_tag":"","temperature":0.0})");
    CHECK(cache_key(base).hex() == "9fd01ce3f5955d61e7cc88f97f8a97851fa99a5d45e339fca0e354c6a7dedf37");
    CHECK(cache_key(request_for("hi", 0.7)).hex() ==
          "c297ae9652be615594748db58eddbb34d5529d6d468399354bbb569c5c054585");

    CHECK(cache_key(base) == cache_key(request_for("hi")));
    GenerationRequest changed = base;
    changed.seed_tag = "seed=1;iter=0;depth=0";
    CHECK(cache_key(changed) != cache_key(base));
    changed = base;
    changed.max_tokens = 513;
    CHECK(cache_key(changed) != cache_key(base));
    changed = base;
    changed.model_name = "other";
    CHECK(cache_key(changed) != cache_key(base));
    changed = base;
    changed.messages[0].role = Role::User;
    CHECK(cache_key(changed) != cache_key(base));

    const CacheKey key = cache_key(base);
    CHECK(CacheKey::from_hex(key.hex()) == key);
    CHECK_FALSE(CacheKey::from_hex("abc").has_value());
    CHECK_FALSE(CacheKey::from_hex(std::string(64, 'z')).has_value());
}

TEST_CASE("caching model returns stored replies without calling the backend") {
    testing::TempDir dir("cache");
    auto backend = std::make_shared<CountingModel>();
    auto cache = std::make_shared<ResponseCache>(dir.path() / "nested" / "responses.cache");
    CachingModel model(backend, cache);

    const GenerationResponse first = model.generate(request_for("q"));
    CHECK_FALSE(first.cached);
    const GenerationResponse second = model.generate(request_for("q"));
    CHECK(second.cached);
    CHECK(second.content == first.content);
    CHECK(backend->calls == 1);
    CHECK(model.backend_calls() == 1);

    model.generate(request_for("q", 0.7));
    CHECK(backend->calls == 2);
}

TEST_CASE("cache persists across reopen and skips corrupted records") {
    testing::TempDir dir("persist");
    const auto file = dir.path() / "responses.cache";
    const std::string multiline = "line one\nline two\n\nThe answer is 4";
    {
        ResponseCache cache(file);
        cache.put(cache_key(request_for("a")), "alpha");
        cache.put(cache_key(request_for("b")), multiline);
        cache.put(cache_key(request_for("c")), "");
    }
    {
        ResponseCache cache(file);
        CHECK(cache.size() == 3);
        CHECK(cache.get(cache_key(request_for("a"))) == "alpha");
        CHECK(cache.get(cache_key(request_for("b"))) == multiline);
        CHECK(cache.get(cache_key(request_for("c"))) == "");
        CHECK_FALSE(cache.get(cache_key(request_for("d"))).has_value());
        CHECK(cache.corrupted_records() == 0);
    }
    {
        std::ofstream out(file, std::ios::app);
        out << "not-a-header\n";
    }
    {
        ResponseCache cache(file);
        cache.put(cache_key(request_for("d")), "delta");
    }
    {
        ResponseCache cache(file);
        CHECK(cache.corrupted_records() == 1);
        CHECK(cache.size() == 4);
        CHECK(cache.get(cache_key(request_for("d"))) == "delta");
    }
    {
        std::ofstream out(file, std::ios::app);
        out << cache_key(request_for("e")).hex() << " 100\nshort";
    }
    ResponseCache cache(file);
    CHECK(cache.corrupted_records() == 2);
    CHECK(cache.size() == 4);
}

TEST_CASE("concurrent identical misses reach the backend once") {
    testing::TempDir dir("race");
    class SlowModel : public Model {
    public:
        GenerationResponse generate(const GenerationRequest&) override {
            ++calls;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            return {"slow", false, 0};
        }
        std::atomic<int> calls{0};
    };
    auto backend = std::make_shared<SlowModel>();
    CachingModel model(backend, std::make_shared<ResponseCache>(dir.path() / "c"));
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] { CHECK(model.generate(request_for("same")).content == "slow"); });
    }
    for (auto& t : threads) t.join();
    CHECK(backend->calls == 1);
}

TEST_CASE("scripted model") {
    SUBCASE("first matching entry wins") {
        ScriptedModel model({{"angle", "first"}, {"hexagon", "second"}});
        CHECK(model.generate(request_for("interior angle of a hexagon")).content == "first");
        CHECK(model.generate(request_for("a hexagon")).content == "second");
        CHECK(model.calls() == 2);
    }
    SUBCASE("matching looks only at the final user message") {
        ScriptedModel model({{"sys", "system matched"}, {"", "fallback"}});
        CHECK(model.generate(request_for("user text")).content == "fallback");
    }
    SUBCASE("unmatched prompt") {
        ScriptedModel model(std::vector<ScriptEntry>{{"x", "y"}});
        CHECK_THROWS_AS(model.generate(request_for("nothing here")), ScriptMissError);
    }
    SUBCASE("one-shot entries are consumed") {
        ScriptedModel model({{"q", "once", true}, {"q", "again"}});
        CHECK(model.generate(request_for("q")).content == "once");
        CHECK(model.generate(request_for("q")).content == "again");
        CHECK(model.generate(request_for("q")).content == "again");
    }
    SUBCASE("empty script") {
        CHECK_THROWS_AS(ScriptedModel(std::vector<ScriptEntry>{}), DomainError);
    }
    SUBCASE("script file") {
        const auto script = testing::hexagon_script();
        CHECK(script.size() == 7);
        CHECK(script.front().matcher == "Proposed answer: 720");
        CHECK_THROWS_AS(ScriptedModel::load_script(testing::data_path("missing.json")), ConfigError);
        CHECK_THROWS_AS(ScriptedModel::load_script(testing::data_path("three_tasks.jsonl")), ConfigError);
    }
}

namespace {

struct FakeTransport {
    std::vector<HttpReply> replies;
    std::vector<std::string> bodies;
    std::vector<std::vector<std::pair<std::string, std::string>>> headers;
    std::size_t next = 0;

    HttpTransport bind() {
        return [this](const std::string&, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& h, std::chrono::seconds) {
            bodies.push_back(body);
            headers.push_back(h);
            return replies.at(std::min(next++, replies.size() - 1));
        };
    }
};

std::string ok_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST_CASE("http model retries") {
    FakeTransport transport;
    std::vector<std::chrono::milliseconds> sleeps;
    auto sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
    HttpModelOptions options;
    options.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    options.api_key = "secret";

    SUBCASE("three server errors exhaust the attempts") {
        transport.replies = {{500, "boom"}};
        HttpModel model(options, transport.bind(), sleep);
        try {
            model.generate(request_for("hi"));
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.status() == 500);
        }
        CHECK(transport.bodies.size() == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                                std::chrono::milliseconds(1000)});
    }
    SUBCASE("rate limit then success") {
        transport.replies = {{429, ""}, {0, ""}, {200, ok_body("fine")}};
        HttpModel model(options, transport.bind(), sleep);
        const GenerationResponse response = model.generate(request_for("hi"));
        CHECK(response.content == "fine");
        CHECK_FALSE(response.cached);
        CHECK(transport.bodies.size() == 3);
    }
    SUBCASE("client errors are not retried") {
        transport.replies = {{401, "denied"}};
        HttpModel model(options, transport.bind(), sleep);
        CHECK_THROWS_AS(model.generate(request_for("hi")), TransportError);
        CHECK(transport.bodies.size() == 1);
        CHECK(sleeps.empty());
    }
    SUBCASE("malformed body") {
        transport.replies = {{200, R"({"choices": []})"}};
        HttpModel model(options, transport.bind(), sleep);
        CHECK_THROWS_AS(model.generate(request_for("hi")), ProtocolError);
    }
    SUBCASE("wire format") {
        transport.replies = {{200, ok_body("x")}};
        HttpModel model(options, transport.bind(), sleep);
        model.generate(request_for("hi", 0.7));
        const auto sent = nlohmann::json::parse(transport.bodies.at(0));
        CHECK(sent["model"] == "glm-4-flash");
        CHECK(sent["temperature"] == 0.7);
        CHECK(sent["max_tokens"] == 512);
        CHECK(sent["messages"][1]["role"] == "user");
        CHECK(sent["messages"][1]["content"] == "hi");
        REQUIRE(transport.headers.at(0).size() == 1);
        CHECK(transport.headers[0][0].second == "Bearer secret");
    }
    SUBCASE("missing endpoint") {
        options.endpoint.clear();
        CHECK_THROWS_AS(HttpModel(options, transport.bind(), sleep), ConfigError);
    }
}

TEST_CASE("decode_reply") {
    CHECK(HttpModel::decode_reply(ok_body("hello")) == "hello");
    CHECK_THROWS_AS(HttpModel::decode_reply("<html>"), ProtocolError);
    CHECK_THROWS_AS(HttpModel::decode_reply(R"({"choices":[{"message":{"content":3}}]})"), ProtocolError);
}

TEST_CASE("httplib transport against a local server") {
    httplib::Server server;
    std::string seen_auth;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.set_content(ok_body("from server"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpModelOptions options;
    options.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    options.api_key = "k";
    HttpModel model(options);
    CHECK(model.generate(request_for("ping")).content == "from server");
    CHECK(seen_auth == "Bearer k");
    CHECK(nlohmann::json::parse(seen_body)["messages"][1]["content"] == "ping");

    server.stop();
    worker.join();

    const HttpReply refused = httplib_post(options.endpoint, "{}", {}, std::chrono::seconds(1));
    CHECK(refused.status == 0);
}
