#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/prompts.hpp"
#include "pmcts/synthetic.hpp"

using namespace pmcts;

namespace {

SyntheticTreeSpec make_spec(int depth, int branching, std::vector<double> rewards) {
    SyntheticTreeSpec spec;
    spec.depth = depth;
    spec.branching = branching;
    spec.leaf_rewards = std::move(rewards);
    return spec;
}

// Depth-first walk over explicit paths; keeps the first strictly greater leaf.
Optimum brute_force(const SyntheticTreeSpec& spec) {
    Optimum best{{}, -1.0};
    std::vector<int> path;
    std::function<void()> walk = [&] {
        if (static_cast<int>(path.size()) == spec.depth) {
            const double r = spec.reward(path);
            if (r > best.reward) best = Optimum{path, r};
            return;
        }
        for (int b = 1; b <= spec.branching; ++b) {
            path.push_back(b);
            walk();
            path.pop_back();
        }
    };
    walk();
    return best;
}

GenerationRequest user_request(std::string text) {
    GenerationRequest request;
    request.messages = {{Role::User, std::move(text)}};
    return request;
}

}  // namespace

TEST_CASE("depth-one tree") {
    const SyntheticTreeSpec spec = make_spec(1, 2, {0.1, 0.9});
    const Optimum best = known_optimum(spec);
    CHECK(best.path == std::vector<int>{2});
    CHECK(best.reward == 0.9);

    SyntheticModel model(spec);
    CHECK(model.generate(user_request("Step 1: take branch 2. The answer is leaf-2")).content == "0.9");
    CHECK(model.generate(user_request("(none yet)")).content ==
          "1. take branch 1. The answer is leaf-1\n2. take branch 2. The answer is leaf-2\n");
}

TEST_CASE("model replies by level") {
    SyntheticModel model(make_spec(2, 2, {0.1, 0.3, 0.95, 0.2}));
    CHECK(model.generate(user_request("Steps so far:\n(none yet)")).content == "1. take branch 1\n2. take branch 2\n");
    const std::string second = model.generate(user_request("Step 1: take branch 2")).content;
    CHECK(second == "1. take branch 1. The answer is leaf-2-1\n2. take branch 2. The answer is leaf-2-2\n");
    CHECK(model.generate(user_request("Step 1: take branch 2\nStep 2: take branch 1. The answer is leaf-2-1")).content ==
          "0.95");
    const auto steps = parse_step_list(second, 2);
    CHECK(extract_answer(steps[0]) == "leaf-2-1");
}

TEST_CASE("small reward replies stay in fixed notation") {
    SyntheticModel model(make_spec(1, 2, {0.00001, 0.5}));
    const std::string reply = model.generate(user_request("take branch 1")).content;
    CHECK(reply == "0.00001");
    CHECK(parse_value(reply).score == 0.00001);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(make_spec(0, 2, {}).validate(), SpecError);
    CHECK_THROWS_AS(make_spec(2, 0, {}).validate(), SpecError);
    CHECK_THROWS_AS(make_spec(2, 2, {0.1, 0.2, 0.3}).validate(), SpecError);
    CHECK_THROWS_AS(make_spec(1, 2, {0.1, 1.5}).validate(), SpecError);
    CHECK_THROWS_AS(make_spec(1, 2, {-0.1, 0.5}).validate(), SpecError);
    CHECK_THROWS_AS(make_spec(8, 10, {}).validate(), SpecError);
    SyntheticTreeSpec tight = make_spec(1, 2, {0.5, 0.6});
    tight.margin = 0.2;
    CHECK_THROWS_AS(tight.validate(), SpecError);
    CHECK_THROWS_AS(SyntheticModel(make_spec(1, 2, {0.5})), SpecError);
}

TEST_CASE("equal rewards resolve to the first leaf") {
    const SyntheticTreeSpec spec = make_spec(3, 2, std::vector<double>(8, 0.5));
    CHECK(known_optimum(spec).path == std::vector<int>{1, 1, 1});
}

TEST_CASE("leaf indexing round-trips") {
    const SyntheticTreeSpec spec = SyntheticTreeSpec::random(3, 4, 1);
    for (std::size_t i = 0; i < spec.leaf_count(); ++i) {
        CHECK(spec.leaf_index(spec.leaf_path(i)) == i);
    }
    CHECK(spec.leaf_path(0) == std::vector<int>{1, 1, 1});
    CHECK(spec.leaf_path(63) == std::vector<int>{4, 4, 4});
    CHECK(spec.leaf_index(std::vector<int>{2, 1, 3}) == 18);
    CHECK_THROWS_AS(spec.leaf_index(std::vector<int>{5, 1, 1}), SpecError);
    CHECK_THROWS_AS(spec.leaf_index(std::vector<int>{1, 1}), SpecError);
}

TEST_CASE("known_optimum matches an exhaustive walk") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const int depth = 1 + static_cast<int>(rng() % 3);
        const int branching = 1 + static_cast<int>(rng() % 4);
        const SyntheticTreeSpec spec = SyntheticTreeSpec::random(depth, branching, rng());
        const Optimum expected = brute_force(spec);
        const Optimum actual = known_optimum(spec);
        CHECK(actual.path == expected.path);
        CHECK(actual.reward == expected.reward);
    }
}

TEST_CASE("random specs with a margin have a unique winner") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const SyntheticTreeSpec spec = SyntheticTreeSpec::random(3, 3, seed, 0.2);
        std::vector<double> sorted = spec.leaf_rewards;
        std::sort(sorted.rbegin(), sorted.rend());
        CHECK(sorted[0] - sorted[1] >= 0.2);
        CHECK(sorted[0] <= 1.0);
    }
    CHECK(SyntheticTreeSpec::random(2, 3, 5, 0.2).leaf_rewards == SyntheticTreeSpec::random(2, 3, 5, 0.2).leaf_rewards);
    CHECK(SyntheticTreeSpec::random(2, 3, 5).leaf_rewards != SyntheticTreeSpec::random(2, 3, 6).leaf_rewards);
}

TEST_CASE("spec files") {
    const SyntheticTreeSpec spec = SyntheticTreeSpec::load(testing::data_path("synthetic_small.json"));
    CHECK(spec.depth == 2);
    CHECK(spec.branching == 2);
    CHECK(known_optimum(spec).path == std::vector<int>{2, 1});

    testing::TempDir dir("spec");
    {
        std::ofstream(dir.path() / "seeded.json") << R"({"depth": 2, "branching": 3, "seed": 4, "margin": 0.2})";
        std::ofstream(dir.path() / "bad.json") << R"({"depth": 2, "branching": 3, "colour": "red"})";
        std::ofstream(dir.path() / "short.json") << R"({"depth": 2, "branching": 2, "leaf_rewards": [0.1]})";
    }
    CHECK(SyntheticTreeSpec::load(dir.path() / "seeded.json").leaf_rewards ==
          SyntheticTreeSpec::random(2, 3, 4, 0.2).leaf_rewards);
    CHECK_THROWS_AS(SyntheticTreeSpec::load(dir.path() / "bad.json"), SpecError);
    CHECK_THROWS_AS(SyntheticTreeSpec::load(dir.path() / "short.json"), SpecError);
    CHECK_THROWS_AS(SyntheticTreeSpec::load(dir.path() / "none.json"), SpecError);
}

TEST_CASE("branch decoding") {
    CHECK(decode_branch_path("Step 1: take branch 3\nStep 2: take branch 12") == std::vector<int>{3, 12});
    CHECK(decode_branch_path("nothing").empty());
    CHECK(leaf_label(std::vector<int>{2, 1, 3}) == "leaf-2-1-3");
}
