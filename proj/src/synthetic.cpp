#include "pmcts/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <regex>

#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

constexpr std::size_t kMaxLeaves = 10'000'000;

double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string format_reward(double reward) {
    // Fixed notation: the value parser reads the first decimal literal, so an
    // exponent form such as 1e-05 would be misread.
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), reward, std::chars_format::fixed);
    return std::string(buffer, result.ptr);
}

}  // namespace

void SyntheticTreeSpec::validate() const {
    if (depth < 1) {
        throw SpecError("synthetic spec depth must be >= 1");
    }
    if (branching < 1) {
        throw SpecError("synthetic spec branching must be >= 1");
    }
    std::size_t leaves = 1;
    for (int d = 0; d < depth; ++d) {
        leaves *= static_cast<std::size_t>(branching);
        if (leaves > kMaxLeaves) {
            throw SpecError("synthetic spec has too many leaves");
        }
    }
    if (leaf_rewards.size() != leaves) {
        throw SpecError("synthetic spec needs branching^depth = " + std::to_string(leaves) + " leaf rewards, got " +
                        std::to_string(leaf_rewards.size()));
    }
    for (double r : leaf_rewards) {
        if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
            throw SpecError("synthetic leaf rewards must lie in [0,1]");
        }
    }
    if (margin) {
        if (!(*margin >= 0.0)) {
            throw SpecError("synthetic spec margin must be >= 0");
        }
        if (leaf_rewards.size() > 1) {
            std::vector<double> sorted = leaf_rewards;
            std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
            if (sorted[0] - sorted[1] < *margin || sorted[0] == sorted[1]) {
                throw SpecError("synthetic spec optimum is not unique by the required margin");
            }
        }
    }
}

std::size_t SyntheticTreeSpec::leaf_count() const {
    return leaf_rewards.size();
}

std::size_t SyntheticTreeSpec::leaf_index(std::span<const int> path) const {
    if (path.size() != static_cast<std::size_t>(depth)) {
        throw SpecError("path length differs from the tree depth");
    }
    std::size_t index = 0;
    for (int branch : path) {
        if (branch < 1 || branch > branching) {
            throw SpecError("branch index out of range");
        }
        index = index * static_cast<std::size_t>(branching) + static_cast<std::size_t>(branch - 1);
    }
    return index;
}

std::vector<int> SyntheticTreeSpec::leaf_path(std::size_t index) const {
    std::vector<int> path(static_cast<std::size_t>(depth));
    for (int d = depth - 1; d >= 0; --d) {
        path[static_cast<std::size_t>(d)] = static_cast<int>(index % static_cast<std::size_t>(branching)) + 1;
        index /= static_cast<std::size_t>(branching);
    }
    return path;
}

double SyntheticTreeSpec::reward(std::span<const int> path) const {
    return leaf_rewards.at(leaf_index(path));
}

std::string SyntheticTreeSpec::problem_text() const {
    return "Find the best leaf of a synthetic decision tree with depth " + std::to_string(depth) +
           " and branching factor " + std::to_string(branching) + ".";
}

SyntheticTreeSpec SyntheticTreeSpec::random(int depth, int branching, std::uint64_t seed,
                                            std::optional<double> margin) {
    SyntheticTreeSpec spec;
    spec.depth = depth;
    spec.branching = branching;
    spec.seed = seed;
    spec.margin = margin;
    if (depth < 1 || branching < 1) {
        spec.validate();
    }
    std::size_t leaves = 1;
    for (int d = 0; d < depth; ++d) {
        leaves *= static_cast<std::size_t>(branching);
        if (leaves > kMaxLeaves) {
            throw SpecError("synthetic spec has too many leaves");
        }
    }

    std::mt19937_64 rng(seed);
    spec.leaf_rewards.resize(leaves);
    if (!margin) {
        for (double& r : spec.leaf_rewards) r = unit_draw(rng);
        return spec;
    }
    if (*margin < 0.0 || *margin >= 1.0) {
        throw SpecError("synthetic spec margin must lie in [0,1)");
    }
    const double ceiling = 0.9 * (1.0 - *margin);
    double best_other = 0.0;
    for (double& r : spec.leaf_rewards) {
        r = ceiling * unit_draw(rng);
        best_other = std::max(best_other, r);
    }
    const std::size_t winner = static_cast<std::size_t>(rng() % leaves);
    const double slack = 1.0 - best_other - *margin;
    spec.leaf_rewards[winner] = std::min(1.0, best_other + *margin + slack * (0.01 + 0.99 * unit_draw(rng)));
    if (leaves == 1) {
        spec.leaf_rewards[winner] = std::max(spec.leaf_rewards[winner], *margin);
    }
    spec.validate();
    return spec;
}

SyntheticTreeSpec SyntheticTreeSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SpecError("cannot read synthetic spec " + path.string());
    }
    const nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw SpecError("synthetic spec " + path.string() + " is not a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "depth" && key != "branching" && key != "leaf_rewards" && key != "seed" && key != "margin") {
            throw SpecError("unknown synthetic spec key '" + key + "'");
        }
    }
    try {
        const int depth = doc.at("depth").get<int>();
        const int branching = doc.at("branching").get<int>();
        const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
        std::optional<double> margin;
        if (doc.contains("margin")) {
            margin = doc.at("margin").get<double>();
        }
        if (!doc.contains("leaf_rewards")) {
            return random(depth, branching, seed, margin);
        }
        SyntheticTreeSpec spec;
        spec.depth = depth;
        spec.branching = branching;
        spec.seed = seed;
        spec.margin = margin;
        spec.leaf_rewards = doc.at("leaf_rewards").get<std::vector<double>>();
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("synthetic spec " + path.string() + ": " + e.what());
    }
}

Optimum known_optimum(const SyntheticTreeSpec& spec) {
    spec.validate();
    std::size_t best = 0;
    for (std::size_t i = 1; i < spec.leaf_rewards.size(); ++i) {
        if (spec.leaf_rewards[i] > spec.leaf_rewards[best]) {
            best = i;
        }
    }
    return Optimum{spec.leaf_path(best), spec.leaf_rewards[best]};
}

std::vector<int> decode_branch_path(std::string_view text) {
    static const std::regex kBranch(R"(take branch (\d+))");
    std::vector<int> path;
    using Iterator = std::regex_iterator<std::string_view::const_iterator>;
    for (Iterator it(text.begin(), text.end(), kBranch), end; it != end; ++it) {
        path.push_back(std::stoi((*it)[1].str()));
    }
    return path;
}

std::string leaf_label(std::span<const int> path) {
    std::string label = "leaf";
    for (int branch : path) {
        label += '-' + std::to_string(branch);
    }
    return label;
}

SyntheticModel::SyntheticModel(SyntheticTreeSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

GenerationResponse SyntheticModel::generate(const GenerationRequest& request) {
    validate(request);
    std::vector<int> path = decode_branch_path(request.final_user_message());
    if (path.size() >= static_cast<std::size_t>(spec_.depth)) {
        path.resize(static_cast<std::size_t>(spec_.depth));
        return GenerationResponse{format_reward(spec_.reward(path)), false, 0};
    }

    const bool last_level = path.size() + 1 == static_cast<std::size_t>(spec_.depth);
    std::string reply;
    for (int branch = 1; branch <= spec_.branching; ++branch) {
        reply += std::to_string(branch) + ". take branch " + std::to_string(branch);
        if (last_level) {
            std::vector<int> leaf = path;
            leaf.push_back(branch);
            reply += ". The answer is " + leaf_label(leaf);
        }
        reply += '\n';
    }
    return GenerationResponse{std::move(reply), false, 0};
}

std::shared_ptr<Model> as_scripted_model(const SyntheticTreeSpec& spec) {
    return std::make_shared<SyntheticModel>(spec);
}

}  // namespace pmcts
