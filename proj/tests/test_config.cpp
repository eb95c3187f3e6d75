#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "pmcts/config.hpp"
#include "pmcts/errors.hpp"

using namespace pmcts;

TEST_CASE("defaults without a file") {
    const AppConfig config = resolve_config(std::nullopt, {});
    CHECK(config.model.endpoint.empty());
    CHECK(config.model.model_name == "glm-4-flash");
    CHECK(config.model.api_key_env == "PMCTS_API_KEY");
    CHECK(config.search.iterations == 32);
    CHECK(config.eval.strategy == Strategy::ImprovedMcts);
    CHECK(config.paths.report_dir == "reports");
}

TEST_CASE("example config loads") {
    const AppConfig config = AppConfig::load(testing::data_path("config_example.json"));
    CHECK(config.model.endpoint.find("chat/completions") != std::string::npos);
    CHECK(config.search.c0 == 1.414);
    CHECK(config.search_config().model_name == "glm-4-flash");
}

TEST_CASE("precedence: flag over file over default") {
    testing::TempDir dir("config");
    const auto file = dir.path() / "c.json";
    std::ofstream(file) << R"({"search": {"iterations": 10, "kappa": 0.25},
                              "model": {"model_name": "file-model"},
                              "paths": {"report_dir": "file-reports"}})";

    ConfigOverrides flags;
    flags.iterations = 5;
    flags.report_dir = "flag-reports";
    flags.seed = 42;

    const AppConfig none = resolve_config(std::nullopt, {});
    const AppConfig file_only = resolve_config(file, {});
    const AppConfig flag_only = resolve_config(std::nullopt, flags);
    const AppConfig both = resolve_config(file, flags);

    CHECK(none.search.iterations == 32);
    CHECK(file_only.search.iterations == 10);
    CHECK(flag_only.search.iterations == 5);
    CHECK(both.search.iterations == 5);

    CHECK(both.search.kappa == 0.25);
    CHECK(flag_only.search.kappa == 0.5);
    CHECK(both.model.model_name == "file-model");
    CHECK(both.search_config().model_name == "file-model");
    CHECK(both.paths.report_dir == "flag-reports");
    CHECK(file_only.paths.report_dir == "file-reports");
    CHECK(both.search.seed == 42);
    CHECK(file_only.search.seed == 0);
}

TEST_CASE("invalid configs") {
    CHECK_THROWS_AS(AppConfig::parse(R"({"search": {"iterationz": 3}})"), ConfigError);
    CHECK_THROWS_AS(AppConfig::parse(R"({"extra": {}})"), ConfigError);
    CHECK_THROWS_AS(AppConfig::parse(R"({"search": {"iterations": "many"}})"), ConfigError);
    CHECK_THROWS_AS(AppConfig::parse(R"({"search": {"iterations": 0}})"), ConfigError);
    CHECK_THROWS_AS(AppConfig::parse(R"({"eval": {"strategy": "beam"}})"), ConfigError);
    CHECK_THROWS_AS(AppConfig::parse("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(AppConfig::load("/nonexistent/pmcts.json"), ConfigError);

    ConfigOverrides flags;
    flags.c0 = -1.0;
    CHECK_THROWS_AS(resolve_config(std::nullopt, flags), ConfigError);
}
