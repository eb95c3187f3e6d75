#include "pmcts/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        const auto uch = static_cast<unsigned char>(ch);
        if (std::ispunct(uch) != 0) {
            continue;
        }
        if (std::isspace(uch) != 0) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uch)));
    }
    return out;
}

/// Option index named by `text`, either as a label or as the option's text.
std::optional<std::size_t> option_index(std::string_view text, std::span<const std::string> options) {
    const std::string norm = normalize_answer(text);
    if (norm.size() == 1 && norm[0] >= 'a' && static_cast<std::size_t>(norm[0] - 'a') < options.size()) {
        return static_cast<std::size_t>(norm[0] - 'a');
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (!norm.empty() && normalize_answer(options[i]) == norm) {
            return i;
        }
    }
    return std::nullopt;
}

std::string required_string(const nlohmann::json& doc, const char* field, std::size_t line) {
    if (!doc.contains(field) || doc[field].is_null()) {
        throw DatasetError(std::string("missing field '") + field + "'", line);
    }
    const nlohmann::json& value = doc[field];
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_number_integer()) {
        return std::to_string(value.get<std::int64_t>());
    }
    if (value.is_number()) {
        return value.dump();
    }
    throw DatasetError(std::string("field '") + field + "' must be a string", line);
}

}  // namespace

std::vector<TaskRecord> parse_dataset(std::istream& in, const std::string& default_part) {
    std::vector<TaskRecord> tasks;
    std::set<std::string> ids;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw DatasetError("line is not a JSON object", line);
        }
        TaskRecord task;
        task.id = required_string(doc, "id", line);
        task.question = required_string(doc, "question", line);
        task.gold = required_string(doc, "answer", line);
        task.part = doc.contains("part") && !doc["part"].is_null() ? required_string(doc, "part", line) : default_part;
        if (doc.contains("options") && !doc["options"].is_null()) {
            const nlohmann::json& options = doc["options"];
            if (!options.is_array()) {
                throw DatasetError("field 'options' must be an array of strings", line);
            }
            for (const nlohmann::json& option : options) {
                if (!option.is_string()) {
                    throw DatasetError("field 'options' must be an array of strings", line);
                }
                task.options.push_back(option.get<std::string>());
            }
        }
        if (normalize_answer(task.gold).empty()) {
            throw DatasetError("field 'answer' is empty", line);
        }
        if (!task.options.empty() && !option_index(task.gold, task.options)) {
            throw DatasetError("answer '" + task.gold + "' matches no option", line);
        }
        if (!ids.insert(task.id).second) {
            throw DatasetError("duplicate task id '" + task.id + "'", line);
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<TaskRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DatasetError("cannot read dataset " + path.string(), 0);
    }
    return parse_dataset(in, path.stem().string());
}

std::string task_problem_text(const TaskRecord& task) {
    if (task.options.empty()) {
        return task.question;
    }
    return task.question + "\nOptions:\n" + render_options(task.options);
}

std::string_view strategy_name(Strategy strategy) {
    return strategy == Strategy::Cot ? "cot" : "improved-mcts";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    if (name == "cot") return Strategy::Cot;
    if (name == "improved-mcts") return Strategy::ImprovedMcts;
    return std::nullopt;
}

CotAnswer run_cot_baseline(const TaskRecord& task, const MctsConfig& config, Model& model,
                           const PromptSet& prompts) {
    GenerationRequest request = render_cot(task.question, task.options, prompts);
    request.model_name = config.model_name;
    request.max_tokens = config.max_tokens;
    request.temperature = 0.0;
    CotAnswer result;
    result.reply = model.generate(request).content;
    try {
        result.answer = extract_answer(result.reply, task.options);
    } catch (const ExtractionError&) {
        result.answer.reset();
    }
    return result;
}

bool score_answer(std::string_view predicted, std::string_view gold, std::span<const std::string> options) {
    if (!options.empty()) {
        const auto p = option_index(predicted, options);
        const auto g = option_index(gold, options);
        if (p && g) {
            return *p == *g;
        }
    }
    const std::string norm = normalize_answer(predicted);
    return !norm.empty() && norm == normalize_answer(gold);
}

std::int64_t RunReport::tasks_run() const {
    std::int64_t total = 0;
    for (const auto& [part, score] : per_part) {
        total += score.total;
    }
    return total;
}

double macro_average(std::span<const double> accuracies) {
    if (accuracies.empty()) {
        throw DomainError("macro average of no parts");
    }
    double sum = 0.0;
    for (double a : accuracies) {
        sum += a;
    }
    return sum / static_cast<double>(accuracies.size());
}

double round2(double value) {
    // 65.605 is stored as 65.6049999...; the nudge keeps half-up behaviour on
    // values that are exact to two decimals in decimal arithmetic.
    const double scaled = value * 100.0;
    return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::fabs(scaled))) / 100.0;
}

std::string format2(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.2f", round2(value));
    return buffer;
}

RunReport aggregate_report(std::span<const std::pair<std::string, bool>> results) {
    if (results.empty()) {
        throw DomainError("aggregate_report needs at least one result");
    }
    RunReport report;
    for (const auto& [part, correct] : results) {
        PartScore& score = report.per_part[part];
        ++score.total;
        if (correct) ++score.correct;
    }
    std::vector<double> accuracies;
    for (const auto& [part, score] : report.per_part) {
        accuracies.push_back(score.accuracy());
    }
    report.macro_average = macro_average(accuracies);
    return report;
}

std::string RunReport::to_json(bool include_wall_time) const {
    nlohmann::ordered_json doc;
    doc["strategy"] = strategy;
    doc["model_name"] = model_name;
    doc["tasks_run"] = tasks_run();
    nlohmann::ordered_json parts = nlohmann::ordered_json::array();
    for (const auto& [part, score] : per_part) {
        parts.push_back({{"part", part},
                         {"correct", score.correct},
                         {"total", score.total},
                         {"accuracy", round2(score.accuracy())}});
    }
    doc["per_part"] = std::move(parts);
    doc["macro_average"] = round2(macro_average);
    if (include_wall_time) {
        doc["wall_time_s"] = wall_time_s;
    }
    nlohmann::ordered_json outcomes = nlohmann::ordered_json::array();
    for (const TaskOutcome& t : tasks) {
        outcomes.push_back({{"id", t.id},
                            {"part", t.part},
                            {"predicted", t.predicted},
                            {"correct", t.correct},
                            {"flagged", t.flagged}});
    }
    doc["tasks"] = std::move(outcomes);
    return doc.dump(2) + "\n";
}

std::string RunReport::to_csv() const {
    std::string out = "part,correct,total,accuracy\n";
    std::int64_t correct = 0;
    for (const auto& [part, score] : per_part) {
        out += part + "," + std::to_string(score.correct) + "," + std::to_string(score.total) + "," +
               format2(score.accuracy()) + "\n";
        correct += score.correct;
    }
    out += "macro," + std::to_string(correct) + "," + std::to_string(tasks_run()) + "," + format2(macro_average) +
           "\n";
    return out;
}

std::uint64_t task_seed(std::uint64_t global_seed, std::string_view task_id) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : task_id) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    // splitmix64 finalizer over the combination
    std::uint64_t z = global_seed ^ hash;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

RunReport run_eval(std::span<const TaskRecord> tasks, const EvalOptions& options, Model& model) {
    if (tasks.empty()) {
        throw DatasetError("no tasks to evaluate", 0);
    }
    const PromptSet& prompts = options.prompts != nullptr ? *options.prompts : PromptSet::builtin();
    options.search.validate();
    const auto start = std::chrono::steady_clock::now();

    std::vector<TaskOutcome> outcomes(tasks.size());
    auto run_one = [&](std::size_t i) {
        const TaskRecord& task = tasks[i];
        TaskOutcome& outcome = outcomes[i];
        outcome.id = task.id;
        outcome.part = task.part;
        if (options.strategy == Strategy::Cot) {
            const CotAnswer cot = run_cot_baseline(task, options.search, model, prompts);
            outcome.flagged = !cot.answer.has_value();
            outcome.predicted = cot.answer.value_or("");
        } else {
            MctsConfig config = options.search;
            config.seed = task_seed(options.search.seed, task.id);
            const SearchResult result = run_search(task_problem_text(task), config, model, prompts);
            outcome.predicted = result.answer;
            if (!task.options.empty() && !outcome.predicted.empty()) {
                try {
                    outcome.predicted = extract_answer(std::string(kAnswerMarker) + " " + result.answer, task.options);
                } catch (const ExtractionError&) {
                }
            }
            outcome.flagged = result.fell_back || outcome.predicted.empty();
        }
        outcome.correct = !outcome.predicted.empty() && score_answer(outcome.predicted, task.gold, task.options);
    };

    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.parallelism, 1)), 1,
                                                        tasks.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            run_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                    try {
                        run_one(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next.store(tasks.size());
                    }
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    std::vector<std::pair<std::string, bool>> results;
    results.reserve(outcomes.size());
    for (const TaskOutcome& o : outcomes) {
        results.emplace_back(o.part, o.correct);
    }
    RunReport report = aggregate_report(results);
    report.strategy = std::string(strategy_name(options.strategy));
    report.model_name = options.search.model_name;
    report.tasks = std::move(outcomes);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace pmcts
