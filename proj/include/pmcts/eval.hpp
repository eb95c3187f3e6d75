#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmcts/model.hpp"
#include "pmcts/prompts.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

/// One benchmark question. Empty `options` means a free-form answer.
struct TaskRecord {
    std::string id;
    std::string question;
    std::vector<std::string> options;
    std::string gold;
    std::string part;
};

/// Reads JSON lines with fields id, question, options?, answer, part?.
/// A missing part defaults to `default_part`. Blank lines are skipped.
/// Throws DatasetError with the 1-based line number.
std::vector<TaskRecord> parse_dataset(std::istream& in, const std::string& default_part);

/// parse_dataset on a file; the default part is the file stem.
std::vector<TaskRecord> load_dataset(const std::filesystem::path& path);

/// Question followed by its options block, as shown to the model.
std::string task_problem_text(const TaskRecord& task);

enum class Strategy { ImprovedMcts, Cot };

std::string_view strategy_name(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);

struct CotAnswer {
    std::optional<std::string> answer;  // empty when extraction failed
    std::string reply;
};

/// Single zero-shot chain-of-thought prompt, then answer extraction.
CotAnswer run_cot_baseline(const TaskRecord& task, const MctsConfig& config, Model& model,
                           const PromptSet& prompts = PromptSet::builtin());

/// Case-insensitive comparison after stripping punctuation and collapsing
/// whitespace. With options, an option label and that option's text are equal.
bool score_answer(std::string_view predicted, std::string_view gold, std::span<const std::string> options = {});

struct TaskOutcome {
    std::string id;
    std::string part;
    std::string predicted;
    bool correct = false;
    bool flagged = false;  // no extractable answer, or MCTS fell back to CoT
};

struct PartScore {
    std::int64_t correct = 0;
    std::int64_t total = 0;

    double accuracy() const { return total > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct RunReport {
    std::map<std::string, PartScore> per_part;
    double macro_average = 0.0;
    std::string strategy;
    std::string model_name;
    double wall_time_s = 0.0;
    std::vector<TaskOutcome> tasks;

    std::int64_t tasks_run() const;

    /// Pretty JSON. Percentages are rounded to 2 decimals.
    std::string to_json(bool include_wall_time = true) const;
    /// part,correct,total,accuracy rows plus a closing macro row.
    std::string to_csv() const;
};

/// Unweighted mean of per-part accuracies. Throws DomainError on empty input.
RunReport aggregate_report(std::span<const std::pair<std::string, bool>> results);

/// Mean of the given percentages.
double macro_average(std::span<const double> accuracies);

/// Half-up rounding to 2 decimals, tolerant of binary representation error.
double round2(double value);
std::string format2(double value);

/// Per-task seed: global seed mixed with an FNV-1a hash of the task id.
std::uint64_t task_seed(std::uint64_t global_seed, std::string_view task_id);

struct EvalOptions {
    Strategy strategy = Strategy::ImprovedMcts;
    MctsConfig search;
    int parallelism = 1;
    const PromptSet* prompts = nullptr;  // built-ins when null
};

/// Runs every task under the chosen strategy and aggregates the outcomes.
/// Model transport failures propagate (SearchAbortedError / TransportError).
RunReport run_eval(std::span<const TaskRecord> tasks, const EvalOptions& options, Model& model);

}  // namespace pmcts
