#include "pmcts/search.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

void MctsConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(c0 > 0.0 && std::isfinite(c0), "search.c0 must be > 0");
    require(kappa >= 0.0 && std::isfinite(kappa), "search.kappa must be >= 0");
    require(complexity_threshold >= 1, "search.complexity_threshold must be >= 1");
    require(iterations >= 1, "search.iterations must be >= 1");
    require(expand_width >= 1, "search.expand_width must be >= 1");
    require(max_depth >= 1, "search.max_depth must be >= 1");
    require(rollout_temperature >= 0.0, "search.rollout_temperature must be >= 0");
    require(max_tokens >= 1, "search.max_tokens must be >= 1");
}

std::string_view policy_name(SimulationPolicy policy) {
    return policy == SimulationPolicy::Greedy ? "greedy" : "random";
}

double dynamic_exploration(double c0, double kappa, std::int64_t visits) {
    if (!(c0 > 0.0) || !(kappa >= 0.0) || visits < 0) {
        throw DomainError("dynamic_exploration requires c0 > 0, kappa >= 0, visits >= 0");
    }
    return c0 / (1.0 + kappa * std::log1p(static_cast<double>(visits)));
}

std::size_t complexity(std::string_view text) {
    std::size_t tokens = 0;
    bool in_token = false;
    for (char ch : text) {
        const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
        if (!space && !in_token) {
            ++tokens;
        }
        in_token = !space;
    }
    return tokens;
}

SimulationPolicy choose_simulation_policy(const MctsConfig& config, const ReasoningState& state) {
    std::size_t measured = complexity(state.problem);
    if (config.per_node_complexity) {
        for (const std::string& step : state.steps) {
            measured += complexity(step);
        }
    }
    const bool complex = measured >= static_cast<std::size_t>(config.complexity_threshold);
    return complex == config.greedy_when_complex ? SimulationPolicy::Greedy : SimulationPolicy::Random;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(ch);
    }
    return out;
}

std::string SearchResult::to_report() const {
    nlohmann::ordered_json doc;
    doc["answer"] = answer;
    doc["steps"] = steps;
    doc["root_visits"] = root_visits;
    doc["best_q"] = best_q;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (SimulationPolicy policy : {SimulationPolicy::Greedy, SimulationPolicy::Random}) {
        const auto it = policy_counts.find(policy);
        counts[std::string(policy_name(policy))] = it == policy_counts.end() ? 0 : it->second;
    }
    doc["policy_counts"] = std::move(counts);
    doc["fell_back"] = fell_back;
    doc["value_parse_failures"] = value_parse_failures;
    doc["expansion_failures"] = expansion_failures;
    doc["rollout_failures"] = rollout_failures;
    return doc.dump(2) + "\n";
}

MctsSearch::MctsSearch(std::string problem, MctsConfig config, Model& model, const PromptSet& prompts)
    : config_(std::move(config)),
      model_(model),
      prompts_(prompts),
      tree_(std::move(problem), config_.seed),
      rng_(config_.seed) {
    config_.validate();
}

GenerationRequest MctsSearch::prepare(GenerationRequest request, double temperature, std::string seed_tag) const {
    request.model_name = config_.model_name;
    request.max_tokens = config_.max_tokens;
    request.temperature = temperature;
    request.seed_tag = std::move(seed_tag);
    return request;
}

std::size_t MctsSearch::pick_uniform(std::size_t n) {
    // Modulo of a 64-bit draw: identical on every standard library, unlike
    // std::uniform_int_distribution. The bias is below 2^-60 for small n.
    return static_cast<std::size_t>(rng_() % n);
}

std::vector<NodeId> MctsSearch::expand(NodeId leaf) {
    const ReasoningState state = tree_.node(leaf).state;
    const GenerationRequest request =
        prepare(render_propose_steps(state.problem, state.steps, config_.expand_width, prompts_), 0.0, "");
    std::vector<std::string> proposals;
    try {
        proposals = parse_step_list(model_.generate(request).content, config_.expand_width);
    } catch (const ParseError&) {
        ++expansion_failures_;
        return {};
    }

    std::set<std::string> seen;
    std::vector<NodeId> added;
    for (std::string& step : proposals) {
        if (!seen.insert(normalize_whitespace(step)).second) {
            continue;
        }
        std::optional<std::string> answer;
        if (contains_answer_marker(step)) {
            try {
                answer = extract_answer(step);
            } catch (const ExtractionError&) {
            }
        }
        const bool terminal = answer.has_value();
        added.push_back(tree_.add_child(leaf, std::move(step), terminal, std::move(answer)));
    }
    return added;
}

double MctsSearch::score_answer_state(const ReasoningState& state) {
    const GenerationRequest request =
        prepare(render_value_score(state.problem, state.steps, state.answer.value_or(""), prompts_), 0.0, "");
    try {
        return parse_value(model_.generate(request).content).score;
    } catch (const ParseError&) {
        ++value_parse_failures_;
        return 0.0;
    }
}

double MctsSearch::terminal_value(NodeId node) {
    if (const auto it = terminal_values_.find(node.index); it != terminal_values_.end()) {
        return it->second;
    }
    const double value = score_answer_state(tree_.node(node).state);
    terminal_values_.emplace(node.index, value);
    return value;
}

RolloutOutcome MctsSearch::simulate(NodeId node, SimulationPolicy policy) {
    const Node& start = tree_.node(node);
    if (start.terminal) {
        throw StructuralError("cannot simulate from a terminal node");
    }
    RolloutOutcome outcome{start.state, 0.0};
    ReasoningState& state = outcome.final_state;
    std::size_t depth = start.depth;

    while (depth < static_cast<std::size_t>(config_.max_depth)) {
        std::string next;
        try {
            if (policy == SimulationPolicy::Greedy) {
                const auto request = prepare(render_propose_steps(state.problem, state.steps, 1, prompts_), 0.0, "");
                next = parse_step_list(model_.generate(request).content, 1).front();
            } else {
                std::ostringstream tag;
                tag << "seed=" << config_.seed << ";iter=" << iteration_ << ";depth=" << depth;
                const auto request =
                    prepare(render_propose_steps(state.problem, state.steps, config_.expand_width, prompts_),
                            config_.rollout_temperature, tag.str());
                auto candidates = parse_step_list(model_.generate(request).content, config_.expand_width);
                next = std::move(candidates[pick_uniform(candidates.size())]);
            }
        } catch (const ParseError&) {
            ++rollout_failures_;
            return outcome;
        }

        ++depth;
        if (contains_answer_marker(next)) {
            try {
                state.answer = extract_answer(next);
            } catch (const ExtractionError&) {
            }
        }
        state.steps.push_back(std::move(next));
        if (state.answer) {
            outcome.reward = score_answer_state(state);
            return outcome;
        }
    }
    return outcome;  // depth cap without an answer scores 0
}

void MctsSearch::step() {
    NodeId current = tree_.root();
    while (!tree_.node(current).children.empty()) {
        // Each candidate's exploration weight decays with its own visit count.
        current = tree_.select_best_child(current, [this](std::int64_t child_visits) {
            return dynamic_exploration(config_.c0, config_.kappa, child_visits);
        });
    }

    const Node& leaf = tree_.node(current);
    const bool expandable = !leaf.terminal && leaf.depth < static_cast<std::size_t>(config_.max_depth) &&
                            (current == tree_.root() || leaf.visits >= 1);
    if (expandable) {
        const std::vector<NodeId> added = expand(current);
        if (!added.empty()) {
            current = added.front();
        }
    }

    double reward = 0.0;
    if (tree_.node(current).terminal) {
        reward = terminal_value(current);
    } else {
        const SimulationPolicy policy = choose_simulation_policy(config_, tree_.node(current).state);
        ++policy_counts_[policy];
        reward = simulate(current, policy).reward;
    }
    tree_.backpropagate(current, reward);
    ++iteration_;
}

SearchResult MctsSearch::run() {
    try {
        for (int i = 0; i < config_.iterations; ++i) {
            step();
        }
    } catch (const TransportError& e) {
        throw SearchAbortedError(std::string("search aborted: ") + e.what(), tree_.export_trace());
    } catch (const ProtocolError& e) {
        throw SearchAbortedError(std::string("search aborted: ") + e.what(), tree_.export_trace());
    }

    SearchResult result;
    result.root_visits = tree_.node(tree_.root()).visits;
    result.policy_counts = policy_counts_;
    try {
        TerminalChain best = tree_.best_terminal_chain();
        result.answer = std::move(best.answer);
        result.steps = std::move(best.steps);
        result.best_q = best.q;
    } catch (const NoSolutionError&) {
        result.fell_back = true;
        const auto request = prepare(render_cot(tree_.node(tree_.root()).state.problem, {}, prompts_), 0.0, "");
        try {
            const std::string reply = model_.generate(request).content;
            result.steps = {reply};
            result.answer = extract_answer(reply);
        } catch (const ExtractionError&) {
            result.answer.clear();
        } catch (const TransportError& e) {
            throw SearchAbortedError(std::string("search aborted: ") + e.what(), tree_.export_trace());
        } catch (const ProtocolError& e) {
            throw SearchAbortedError(std::string("search aborted: ") + e.what(), tree_.export_trace());
        }
    }
    result.value_parse_failures = value_parse_failures_;
    result.expansion_failures = expansion_failures_;
    result.rollout_failures = rollout_failures_;
    result.trace = tree_.export_trace();
    return result;
}

SearchResult run_search(std::string_view problem, const MctsConfig& config, Model& model, const PromptSet& prompts) {
    MctsSearch search(std::string(problem), config, model, prompts);
    return search.run();
}

}  // namespace pmcts
