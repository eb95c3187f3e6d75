#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmcts/eval.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

/// Environment variable read for the bearer credential unless overridden.
inline constexpr const char* kDefaultApiKeyEnv = "PMCTS_API_KEY";

struct ModelSection {
    std::string endpoint;
    std::string model_name = "glm-4-flash";
    int timeout_s = 60;
    int connection_limit = 4;
    std::string api_key_env = kDefaultApiKeyEnv;
};

struct EvalSection {
    std::vector<std::string> datasets;
    Strategy strategy = Strategy::ImprovedMcts;
    int parallelism = 1;
};

struct PathsSection {
    std::string cache_dir = ".pmcts/cache";
    std::string report_dir = "reports";
    std::string prompts_dir;  // empty: built-in templates
};

/// Whole-application settings. JSON file layout mirrors the sections:
/// {"model": {...}, "search": {...}, "eval": {...}, "paths": {...}}.
/// Unknown sections or keys are rejected.
struct AppConfig {
    ModelSection model;
    MctsConfig search;
    EvalSection eval;
    PathsSection paths;

    /// Throws ConfigError.
    static AppConfig parse(std::string_view json_text);
    static AppConfig load(const std::filesystem::path& path);

    /// Search settings with the model name carried over from the model section.
    MctsConfig search_config() const;
};

/// Command-line values; set fields win over the config file.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
    std::optional<int> expand_width;
    std::optional<int> max_depth;
    std::optional<double> c0;
    std::optional<double> kappa;
    std::optional<int> complexity_threshold;
    std::optional<double> rollout_temperature;
    std::optional<std::string> endpoint;
    std::optional<std::string> model_name;
    std::optional<Strategy> strategy;
    std::optional<int> parallelism;
    std::optional<std::string> report_dir;
    std::optional<std::string> cache_dir;
};

/// Defaults, then the config file (if any), then the overrides.
AppConfig resolve_config(const std::optional<std::filesystem::path>& config_file, const ConfigOverrides& overrides);

}  // namespace pmcts
