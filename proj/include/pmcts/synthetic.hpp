#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmcts/model.hpp"

namespace pmcts {

/// A complete tree of fixed depth and branching whose leaves carry rewards.
/// Leaves are stored row-major: path (i1, ..., id), 1-based branch indices,
/// maps to sum_j (i_j - 1) * branching^(depth - j).
struct SyntheticTreeSpec {
    int depth = 3;
    int branching = 3;
    std::vector<double> leaf_rewards;
    std::uint64_t seed = 0;
    std::optional<double> margin;  // required gap between best and second-best leaf

    /// Throws SpecError when the shape or rewards are invalid.
    void validate() const;

    std::size_t leaf_count() const;
    std::size_t leaf_index(std::span<const int> path) const;
    std::vector<int> leaf_path(std::size_t index) const;
    double reward(std::span<const int> path) const;

    /// Problem statement handed to the search.
    std::string problem_text() const;

    /// Rewards drawn from `seed`; with a margin, one leaf beats all others by at least it.
    static SyntheticTreeSpec random(int depth, int branching, std::uint64_t seed,
                                    std::optional<double> margin = std::nullopt);

    /// JSON object with depth, branching and either leaf_rewards or seed (+ optional margin).
    static SyntheticTreeSpec load(const std::filesystem::path& path);
};

struct Optimum {
    std::vector<int> path;  // 1-based branch indices
    double reward = 0.0;
};

/// Exhaustive scan of all leaves; the lowest-index leaf wins ties.
Optimum known_optimum(const SyntheticTreeSpec& spec);

/// Branch indices named by "take branch <i>" phrases, in order of appearance.
std::vector<int> decode_branch_path(std::string_view text);

/// Model that plays the synthetic tree. Proposal prompts get one numbered
/// "take branch i" line per branch; the step reaching full depth carries
/// "The answer is leaf-..."; prompts whose chain already reaches a leaf get
/// that leaf's reward as the reply.
class SyntheticModel : public Model {
public:
    explicit SyntheticModel(SyntheticTreeSpec spec);

    GenerationResponse generate(const GenerationRequest& request) override;

    const SyntheticTreeSpec& spec() const noexcept { return spec_; }

private:
    SyntheticTreeSpec spec_;
};

std::shared_ptr<Model> as_scripted_model(const SyntheticTreeSpec& spec);

/// Leaf answer label for a full path, e.g. "leaf-2-1-3".
std::string leaf_label(std::span<const int> path);

}  // namespace pmcts
