#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pmcts {

/// Dense index into a SearchTree arena. Id 0 is always the root.
struct NodeId {
    std::size_t index = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline constexpr NodeId kRootId{0};
inline constexpr double kRewardSlack = 1e-9;

/// A partial chain of reasoning: the problem plus the steps taken so far.
struct ReasoningState {
    std::string problem;
    std::vector<std::string> steps;
    std::optional<std::string> answer;  // set iff the owning node is terminal
};

struct Node {
    NodeId id;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    ReasoningState state;
    std::int64_t visits = 0;
    double value_sum = 0.0;
    std::size_t depth = 0;
    bool terminal = false;

    /// Q = W / N. Only meaningful once the node has been visited.
    double mean_value() const { return visits > 0 ? value_sum / static_cast<double>(visits) : 0.0; }
};

/// Final chain read back from a finished tree.
struct TerminalChain {
    NodeId node;
    std::vector<std::string> steps;
    std::string answer;
    double q = 0.0;
};

/// UCT score Q + c * sqrt(ln(N_parent) / n_child); +inf for an unvisited child.
/// Throws DomainError when parent_visits < 1, child_visits < 0 or c < 0.
double uct_score(double q, std::int64_t child_visits, std::int64_t parent_visits, double c);

/// Arena-backed search tree. Nodes are never removed, so ids stay dense and
/// iteration order is insertion order.
class SearchTree {
public:
    explicit SearchTree(std::string problem, std::uint64_t rng_seed = 0);

    NodeId root() const noexcept { return kRootId; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::uint64_t rng_seed() const noexcept { return rng_seed_; }

    const Node& node(NodeId id) const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Appends a child whose state is the parent's state plus `step`.
    /// A terminal child must carry an answer; a non-terminal child must not.
    NodeId add_child(NodeId parent, std::string step, bool terminal,
                     std::optional<std::string> answer = std::nullopt);

    /// Child with the highest UCT score at exploration weight `c`.
    /// Ties go to the earliest child in insertion order.
    NodeId select_best_child(NodeId parent, double c) const;

    /// As above, with the exploration weight for each child computed from
    /// that child's visit count.
    NodeId select_best_child(NodeId parent, const std::function<double(std::int64_t)>& exploration) const;

    /// Adds one visit and `reward` to every node on the leaf-to-root path.
    /// Rewards within kRewardSlack of [0,1] are clamped; anything further out,
    /// or NaN, is a DomainError.
    void backpropagate(NodeId leaf, double reward);

    /// Visited terminal with the highest Q; ties by more visits, then lower id.
    TerminalChain best_terminal_chain() const;

    /// Multiplies every value sum by `factor`. Used to check that rankings
    /// depend only on relative rewards.
    void scale_values(double factor);

    /// One JSON object per line, one line per node in id order:
    /// {"id","parent","step","N","W","terminal","answer"}.
    std::string export_trace() const;

private:
    std::vector<Node> nodes_;
    std::uint64_t rng_seed_;
};

}  // namespace pmcts
