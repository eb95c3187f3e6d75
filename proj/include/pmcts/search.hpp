#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pmcts/model.hpp"
#include "pmcts/prompts.hpp"
#include "pmcts/tree.hpp"

namespace pmcts {

struct MctsConfig {
    double c0 = 1.414;                // exploration weight at zero visits
    double kappa = 0.5;               // decay rate of the exploration weight
    int complexity_threshold = 60;    // tokens; at or above selects the greedy rollout
    int iterations = 32;
    int expand_width = 3;
    int max_depth = 8;
    double rollout_temperature = 0.7;
    std::uint64_t seed = 0;

    // Flip to route long problems to the random rollout instead.
    bool greedy_when_complex = true;
    // Measure complexity on problem + chain instead of the bare problem.
    bool per_node_complexity = false;

    std::string model_name = "glm-4-flash";
    int max_tokens = 512;

    /// Throws ConfigError on out-of-range fields.
    void validate() const;
};

enum class SimulationPolicy { Greedy, Random };

std::string_view policy_name(SimulationPolicy policy);

/// c0 / (1 + kappa * ln(1 + visits)).
double dynamic_exploration(double c0, double kappa, std::int64_t visits);

/// Number of maximal whitespace-delimited tokens.
std::size_t complexity(std::string_view text);

SimulationPolicy choose_simulation_policy(const MctsConfig& config, const ReasoningState& state);

struct RolloutOutcome {
    ReasoningState final_state;
    double reward = 0.0;
};

struct SearchResult {
    std::string answer;
    std::vector<std::string> steps;
    std::int64_t root_visits = 0;
    double best_q = 0.0;
    std::map<SimulationPolicy, std::int64_t> policy_counts;
    std::string trace;
    bool fell_back = false;  // no visited terminal; answer comes from the CoT baseline
    std::int64_t value_parse_failures = 0;
    std::int64_t expansion_failures = 0;
    std::int64_t rollout_failures = 0;

    /// Pretty-printed JSON without the trace.
    std::string to_report() const;
};

/// One improved-MCTS run over a single problem. Owns its tree; the model
/// is borrowed and must outlive the search.
class MctsSearch {
public:
    MctsSearch(std::string problem, MctsConfig config, Model& model,
               const PromptSet& prompts = PromptSet::builtin());

    /// One select -> expand -> simulate -> backpropagate cycle.
    void step();

    /// Rollout from a non-terminal node under `policy`.
    RolloutOutcome simulate(NodeId node, SimulationPolicy policy);

    /// Runs the configured budget and collects the result. Falls back to a
    /// chain-of-thought answer when no terminal was visited. Model transport
    /// or protocol failures surface as SearchAbortedError.
    SearchResult run();

    const SearchTree& tree() const noexcept { return tree_; }
    const MctsConfig& config() const noexcept { return config_; }

private:
    std::vector<NodeId> expand(NodeId leaf);
    double terminal_value(NodeId node);
    double score_answer_state(const ReasoningState& state);
    GenerationRequest prepare(GenerationRequest request, double temperature, std::string seed_tag) const;
    std::size_t pick_uniform(std::size_t n);

    MctsConfig config_;
    Model& model_;
    const PromptSet& prompts_;
    SearchTree tree_;
    std::mt19937_64 rng_;
    std::map<std::size_t, double> terminal_values_;
    std::map<SimulationPolicy, std::int64_t> policy_counts_;
    std::int64_t iteration_ = 0;
    std::int64_t value_parse_failures_ = 0;
    std::int64_t expansion_failures_ = 0;
    std::int64_t rollout_failures_ = 0;
};

SearchResult run_search(std::string_view problem, const MctsConfig& config, Model& model,
                        const PromptSet& prompts = PromptSet::builtin());

/// Whitespace-collapsed, trimmed copy; used to deduplicate proposals.
std::string normalize_whitespace(std::string_view text);

}  // namespace pmcts
