#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmcts/model.hpp"

namespace pmcts {

/// Marker every terminal-seeking prompt asks the model to emit.
inline constexpr std::string_view kAnswerMarker = "The answer is";

/// A named prompt. `user_pattern` may reference these placeholders:
///   {problem}  the task text
///   {steps}    the reasoning chain so far, one "Step i: ..." line per step
///   {k}        the requested count, e.g. "exactly 3 distinct alternative next steps"
///   {options}  multiple-choice options block, empty when there are none
///   {answer}   the candidate answer being judged
struct PromptTemplate {
    std::string name;
    std::string system_text;
    std::string user_pattern;
};

/// The templates the search and the baseline use.
struct PromptSet {
    PromptTemplate propose;
    PromptTemplate value;
    PromptTemplate cot;

    static const PromptSet& builtin();

    /// Built-ins overridden by `<dir>/{propose,value,cot}.txt` where present.
    /// File format: system text, a line holding only `---`, then the user pattern.
    static PromptSet load(const std::filesystem::path& dir);
};

/// Substitutes placeholders in one left-to-right pass; substituted text is
/// never rescanned. A documented placeholder without a binding is a
/// TemplateError; other brace groups are left as literal text.
std::string render_pattern(std::string_view pattern, const std::map<std::string, std::string>& bindings);

std::string render_steps(std::span<const std::string> steps);
/// "A. first\nB. second\n..."; empty for no options.
std::string render_options(std::span<const std::string> options);
/// 'A' + index as a one-letter string.
std::string option_label(std::size_t index);

/// Asks for `k` numbered alternative next steps. Temperature 0, empty seed tag;
/// callers adjust both for sampling.
GenerationRequest render_propose_steps(std::string_view problem, std::span<const std::string> steps, int k,
                                       const PromptSet& prompts = PromptSet::builtin());

/// Lines that start with `1.`, `2)` or `-`, trimmed, empties dropped, capped at k.
/// Throws ParseError when nothing qualifies.
std::vector<std::string> parse_step_list(std::string_view content, int k);

struct ValueScore {
    double score = 0.0;
};

GenerationRequest render_value_score(std::string_view problem, std::span<const std::string> steps,
                                     std::string_view answer, const PromptSet& prompts = PromptSet::builtin());

/// First decimal literal in `content`, clamped to [0,1]. ParseError if none.
ValueScore parse_value(std::string_view content);

/// Zero-shot chain-of-thought request for a question and its options.
GenerationRequest render_cot(std::string_view question, std::span<const std::string> options,
                             const PromptSet& prompts = PromptSet::builtin());

bool contains_answer_marker(std::string_view content);

/// Token after the last "The answer is" (any case), stripped of surrounding
/// punctuation. With options the token must name an option label or be a
/// prefix of an option text, and the option label is returned in upper case.
/// Throws ExtractionError otherwise.
std::string extract_answer(std::string_view content, std::span<const std::string> options = {});

}  // namespace pmcts
