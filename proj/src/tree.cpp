#include "pmcts/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

double uct_score(double q, std::int64_t child_visits, std::int64_t parent_visits, double c) {
    if (parent_visits < 1) {
        throw DomainError("uct_score: parent visit count must be >= 1");
    }
    if (child_visits < 0 || c < 0.0 || std::isnan(c)) {
        throw DomainError("uct_score: negative child visits or exploration weight");
    }
    if (child_visits == 0) {
        return std::numeric_limits<double>::infinity();
    }
    const double ratio = std::log(static_cast<double>(parent_visits)) / static_cast<double>(child_visits);
    return q + c * std::sqrt(ratio);
}

SearchTree::SearchTree(std::string problem, std::uint64_t rng_seed) : rng_seed_(rng_seed) {
    Node root;
    root.id = kRootId;
    root.state.problem = std::move(problem);
    nodes_.push_back(std::move(root));
}

const Node& SearchTree::node(NodeId id) const {
    if (id.index >= nodes_.size()) {
        throw StructuralError("unknown node id " + std::to_string(id.index));
    }
    return nodes_[id.index];
}

NodeId SearchTree::add_child(NodeId parent, std::string step, bool terminal,
                             std::optional<std::string> answer) {
    const Node& p = node(parent);
    if (p.terminal) {
        throw IllegalExpansionError("node " + std::to_string(parent.index) + " is terminal");
    }
    if (terminal != (answer.has_value() && !answer->empty())) {
        throw StructuralError("a node carries a non-empty answer iff it is terminal");
    }

    Node child;
    child.id = NodeId{nodes_.size()};
    child.parent = parent;
    child.state.problem = p.state.problem;
    child.state.steps = p.state.steps;
    child.state.steps.push_back(std::move(step));
    child.state.answer = std::move(answer);
    child.depth = p.depth + 1;
    child.terminal = terminal;

    const NodeId id = child.id;
    nodes_.push_back(std::move(child));
    nodes_[parent.index].children.push_back(id);
    return id;
}

NodeId SearchTree::select_best_child(NodeId parent, double c) const {
    return select_best_child(parent, [c](std::int64_t) { return c; });
}

NodeId SearchTree::select_best_child(NodeId parent, const std::function<double(std::int64_t)>& exploration) const {
    const Node& p = node(parent);
    if (p.children.empty()) {
        throw StructuralError("node " + std::to_string(parent.index) + " has no children");
    }
    // An unvisited parent can only be reached through a freshly expanded leaf;
    // every child is then +inf and the first one wins.
    const std::int64_t parent_visits = std::max<std::int64_t>(p.visits, 1);

    NodeId best = p.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId child_id : p.children) {
        const Node& child = nodes_[child_id.index];
        const double score = uct_score(child.mean_value(), child.visits, parent_visits, exploration(child.visits));
        if (score > best_score) {
            best_score = score;
            best = child_id;
        }
    }
    return best;
}

void SearchTree::backpropagate(NodeId leaf, double reward) {
    node(leaf);
    if (std::isnan(reward) || reward < -kRewardSlack || reward > 1.0 + kRewardSlack) {
        throw DomainError("reward must lie in [0,1]");
    }
    reward = std::clamp(reward, 0.0, 1.0);

    std::optional<NodeId> current = leaf;
    while (current) {
        Node& n = nodes_[current->index];
        n.visits += 1;
        n.value_sum += reward;
        current = n.parent;
    }
}

TerminalChain SearchTree::best_terminal_chain() const {
    const Node* best = nullptr;
    for (const Node& n : nodes_) {
        if (!n.terminal || n.visits < 1) {
            continue;
        }
        if (best == nullptr) {
            best = &n;
            continue;
        }
        const double q = n.mean_value();
        const double best_q = best->mean_value();
        // Iteration is in id order, so equal (Q, N) keeps the lower id.
        if (q > best_q || (q == best_q && n.visits > best->visits)) {
            best = &n;
        }
    }
    if (best == nullptr) {
        throw NoSolutionError("no visited terminal node");
    }
    return TerminalChain{best->id, best->state.steps, best->state.answer.value_or(""), best->mean_value()};
}

void SearchTree::scale_values(double factor) {
    for (Node& n : nodes_) {
        n.value_sum *= factor;
    }
}

std::string SearchTree::export_trace() const {
    std::ostringstream out;
    for (const Node& n : nodes_) {
        nlohmann::ordered_json record;
        record["id"] = n.id.index;
        record["parent"] = n.parent ? nlohmann::ordered_json(n.parent->index) : nlohmann::ordered_json(nullptr);
        record["step"] = n.state.steps.empty() ? nlohmann::ordered_json(nullptr)
                                               : nlohmann::ordered_json(n.state.steps.back());
        record["N"] = n.visits;
        record["W"] = n.value_sum;
        record["terminal"] = n.terminal;
        record["answer"] = n.state.answer ? nlohmann::ordered_json(*n.state.answer) : nlohmann::ordered_json(nullptr);
        out << record.dump() << '\n';
    }
    return out.str();
}

}  // namespace pmcts
