#include "pmcts/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& section, const std::string& name, const std::set<std::string>& allowed) {
    if (!section.is_object()) {
        throw ConfigError("config section '" + name + "' must be an object");
    }
    for (const auto& [key, value] : section.items()) {
        if (allowed.count(key) == 0) {
            throw ConfigError("unknown config key '" + name + "." + key + "'");
        }
    }
}

template <typename T>
void read(const json& section, const char* key, T& target) {
    if (section.contains(key)) {
        target = section.at(key).get<T>();
    }
}

}  // namespace

AppConfig AppConfig::parse(std::string_view json_text) {
    const json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("config is not a JSON object");
    }
    reject_unknown(doc, "<root>", {"model", "search", "eval", "paths"});

    AppConfig config;
    try {
        if (doc.contains("model")) {
            const json& m = doc["model"];
            reject_unknown(m, "model", {"endpoint", "model_name", "timeout_s", "connection_limit", "api_key_env"});
            read(m, "endpoint", config.model.endpoint);
            read(m, "model_name", config.model.model_name);
            read(m, "timeout_s", config.model.timeout_s);
            read(m, "connection_limit", config.model.connection_limit);
            read(m, "api_key_env", config.model.api_key_env);
        }
        if (doc.contains("search")) {
            const json& s = doc["search"];
            reject_unknown(s, "search",
                           {"c0", "kappa", "complexity_threshold", "iterations", "expand_width", "max_depth",
                            "rollout_temperature", "seed", "greedy_when_complex", "per_node_complexity",
                            "max_tokens"});
            read(s, "c0", config.search.c0);
            read(s, "kappa", config.search.kappa);
            read(s, "complexity_threshold", config.search.complexity_threshold);
            read(s, "iterations", config.search.iterations);
            read(s, "expand_width", config.search.expand_width);
            read(s, "max_depth", config.search.max_depth);
            read(s, "rollout_temperature", config.search.rollout_temperature);
            read(s, "seed", config.search.seed);
            read(s, "greedy_when_complex", config.search.greedy_when_complex);
            read(s, "per_node_complexity", config.search.per_node_complexity);
            read(s, "max_tokens", config.search.max_tokens);
        }
        if (doc.contains("eval")) {
            const json& e = doc["eval"];
            reject_unknown(e, "eval", {"datasets", "strategy", "parallelism"});
            read(e, "datasets", config.eval.datasets);
            read(e, "parallelism", config.eval.parallelism);
            if (e.contains("strategy")) {
                const auto strategy = parse_strategy(e["strategy"].get<std::string>());
                if (!strategy) {
                    throw ConfigError("eval.strategy must be 'improved-mcts' or 'cot'");
                }
                config.eval.strategy = *strategy;
            }
        }
        if (doc.contains("paths")) {
            const json& p = doc["paths"];
            reject_unknown(p, "paths", {"cache_dir", "report_dir", "prompts_dir"});
            read(p, "cache_dir", config.paths.cache_dir);
            read(p, "report_dir", config.paths.report_dir);
            read(p, "prompts_dir", config.paths.prompts_dir);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    }
    config.search_config().validate();
    if (config.model.timeout_s < 1 || config.model.connection_limit < 1 || config.eval.parallelism < 1) {
        throw ConfigError("timeout_s, connection_limit and parallelism must be >= 1");
    }
    return config;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

MctsConfig AppConfig::search_config() const {
    MctsConfig out = search;
    out.model_name = model.model_name;
    return out;
}

AppConfig resolve_config(const std::optional<std::filesystem::path>& config_file, const ConfigOverrides& o) {
    AppConfig config = config_file ? AppConfig::load(*config_file) : AppConfig{};
    if (o.seed) config.search.seed = *o.seed;
    if (o.iterations) config.search.iterations = *o.iterations;
    if (o.expand_width) config.search.expand_width = *o.expand_width;
    if (o.max_depth) config.search.max_depth = *o.max_depth;
    if (o.c0) config.search.c0 = *o.c0;
    if (o.kappa) config.search.kappa = *o.kappa;
    if (o.complexity_threshold) config.search.complexity_threshold = *o.complexity_threshold;
    if (o.rollout_temperature) config.search.rollout_temperature = *o.rollout_temperature;
    if (o.endpoint) config.model.endpoint = *o.endpoint;
    if (o.model_name) config.model.model_name = *o.model_name;
    if (o.strategy) config.eval.strategy = *o.strategy;
    if (o.parallelism) config.eval.parallelism = *o.parallelism;
    if (o.report_dir) config.paths.report_dir = *o.report_dir;
    if (o.cache_dir) config.paths.cache_dir = *o.cache_dir;
    config.search_config().validate();
    if (config.eval.parallelism < 1) {
        throw ConfigError("parallelism must be >= 1");
    }
    return config;
}

}  // namespace pmcts
