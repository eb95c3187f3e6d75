#include "pmcts/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

const std::set<std::string, std::less<>> kPlaceholders = {"problem", "steps", "k", "options", "answer"};

bool is_identifier_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) != 0 || ch == '_';
}

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::string strip_punctuation(std::string_view token) {
    auto is_punct = [](char ch) { return std::ispunct(static_cast<unsigned char>(ch)) != 0; };
    while (!token.empty() && is_punct(token.front())) token.remove_prefix(1);
    while (!token.empty() && is_punct(token.back())) token.remove_suffix(1);
    return std::string(token);
}

GenerationRequest make_request(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
    GenerationRequest request;
    if (!tmpl.system_text.empty()) {
        request.messages.push_back(Message{Role::System, tmpl.system_text});
    }
    request.messages.push_back(Message{Role::User, render_pattern(tmpl.user_pattern, bindings)});
    return request;
}

std::string count_phrase(int k) {
    if (k == 1) {
        return "exactly one next step";
    }
    return "exactly " + std::to_string(k) + " distinct alternative next steps";
}

PromptSet make_builtin() {
    PromptSet set;
    set.propose = PromptTemplate{
        "propose",
        "You are a careful scientific problem solver. You reason one step at a time.",
        "Problem:\n{problem}\n\n"
        "Steps so far:\n{steps}\n\n"
        "Propose {k} for this reasoning. Write each step on its own line, numbered "
        "\"1.\", \"2.\" and so on, with no other text. If a step reaches the final result, "
        "end that step with \"The answer is <answer>\"."};
    set.value = PromptTemplate{
        "value",
        "You are a strict grader of scientific reasoning.",
        "Problem:\n{problem}\n\n"
        "Reasoning:\n{steps}\n\n"
        "Proposed answer: {answer}\n\n"
        "Judge whether the reasoning and the proposed answer are correct. Reply with a single "
        "number between 0 and 1, where 1 means certainly correct and 0 means certainly wrong."};
    set.cot = PromptTemplate{
        "cot",
        "You are a careful scientific problem solver.",
        "Question:\n{problem}\n{options}\n"
        "Let's think step by step. Finish your reply with \"The answer is <answer>\"."};
    return set;
}

void load_override(const std::filesystem::path& file, PromptTemplate& target) {
    std::ifstream in(file);
    if (!in) {
        return;
    }
    std::ostringstream system;
    std::ostringstream user;
    std::string line;
    bool in_user = false;
    bool first_system = true;
    bool first_user = true;
    while (std::getline(in, line)) {
        if (!in_user && line == "---") {
            in_user = true;
            continue;
        }
        std::ostringstream& out = in_user ? user : system;
        bool& first = in_user ? first_user : first_system;
        if (!first) {
            out << '\n';
        }
        out << line;
        first = false;
    }
    if (!in_user) {
        throw TemplateError("template " + file.string() + " lacks the '---' separator line");
    }
    target.system_text = system.str();
    target.user_pattern = user.str();
}

}  // namespace

const PromptSet& PromptSet::builtin() {
    static const PromptSet set = make_builtin();
    return set;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet set = builtin();
    load_override(dir / "propose.txt", set.propose);
    load_override(dir / "value.txt", set.value);
    load_override(dir / "cot.txt", set.cot);
    return set;
}

std::string render_pattern(std::string_view pattern, const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(pattern.size() + 256);
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            std::size_t j = i + 1;
            while (j < pattern.size() && is_identifier_char(pattern[j])) ++j;
            if (j < pattern.size() && pattern[j] == '}' && j > i + 1) {
                const std::string name(pattern.substr(i + 1, j - i - 1));
                if (auto it = bindings.find(name); it != bindings.end()) {
                    out += it->second;
                    i = j + 1;
                    continue;
                }
                if (kPlaceholders.count(name) != 0) {
                    throw TemplateError("placeholder {" + name + "} has no binding");
                }
            }
        }
        out.push_back(pattern[i]);
        ++i;
    }
    return out;
}

std::string render_steps(std::span<const std::string> steps) {
    if (steps.empty()) {
        return "(none yet)";
    }
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0) out += '\n';
        out += "Step " + std::to_string(i + 1) + ": " + steps[i];
    }
    return out;
}

std::string option_label(std::size_t index) {
    return std::string(1, static_cast<char>('A' + index));
}

std::string render_options(std::span<const std::string> options) {
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += option_label(i) + ". " + options[i] + '\n';
    }
    return out;
}

GenerationRequest render_propose_steps(std::string_view problem, std::span<const std::string> steps, int k,
                                       const PromptSet& prompts) {
    if (k < 1) {
        throw DomainError("k must be >= 1");
    }
    return make_request(prompts.propose, {{"problem", std::string(problem)},
                                          {"steps", render_steps(steps)},
                                          {"k", count_phrase(k)},
                                          {"options", ""}});
}

std::vector<std::string> parse_step_list(std::string_view content, int k) {
    static const std::regex kEnumerated(R"(^\s*(?:\d+[.)](?!\d)|-(?=\s))\s*(.*)$)");
    std::vector<std::string> steps;
    std::istringstream in{std::string(content)};
    std::string line;
    while (std::getline(in, line) && static_cast<int>(steps.size()) < k) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::smatch match;
        if (!std::regex_match(line, match, kEnumerated)) {
            continue;
        }
        const std::string_view body = trim(std::string_view(line).substr(static_cast<std::size_t>(match.position(1))));
        if (!body.empty()) {
            steps.emplace_back(body);
        }
    }
    if (steps.empty()) {
        throw ParseError("no enumerated steps in model output");
    }
    return steps;
}

GenerationRequest render_value_score(std::string_view problem, std::span<const std::string> steps,
                                     std::string_view answer, const PromptSet& prompts) {
    return make_request(prompts.value, {{"problem", std::string(problem)},
                                        {"steps", render_steps(steps)},
                                        {"answer", std::string(answer)},
                                        {"options", ""}});
}

ValueScore parse_value(std::string_view content) {
    static const std::regex kDecimal(R"([-+]?(?:\d+(?:\.\d*)?|\.\d+))");
    std::match_results<std::string_view::const_iterator> match;
    if (!std::regex_search(content.begin(), content.end(), match, kDecimal)) {
        throw ParseError("no decimal literal in value reply");
    }
    const double raw = std::stod(match.str());
    return ValueScore{std::clamp(raw, 0.0, 1.0)};
}

GenerationRequest render_cot(std::string_view question, std::span<const std::string> options,
                             const PromptSet& prompts) {
    std::string options_block;
    if (!options.empty()) {
        options_block = "Options:\n" + render_options(options);
    }
    return make_request(prompts.cot, {{"problem", std::string(question)}, {"options", options_block}});
}

bool contains_answer_marker(std::string_view content) {
    return lower(content).find(lower(kAnswerMarker)) != std::string::npos;
}

std::string extract_answer(std::string_view content, std::span<const std::string> options) {
    const std::string haystack = lower(content);
    const std::string marker = lower(kAnswerMarker);
    const auto at = haystack.rfind(marker);
    if (at == std::string::npos) {
        throw ExtractionError("answer marker not found");
    }
    std::size_t begin = at + marker.size();
    while (begin < content.size() &&
           (std::isspace(static_cast<unsigned char>(content[begin])) != 0 || content[begin] == ':')) {
        ++begin;
    }
    std::size_t end = begin;
    while (end < content.size() && std::isspace(static_cast<unsigned char>(content[end])) == 0) {
        ++end;
    }
    const std::string token = strip_punctuation(content.substr(begin, end - begin));
    if (token.empty()) {
        throw ExtractionError("nothing follows the answer marker");
    }
    if (options.empty()) {
        return token;
    }

    const std::string folded = lower(token);
    if (folded.size() == 1 && folded[0] >= 'a' && static_cast<std::size_t>(folded[0] - 'a') < options.size() &&
        folded[0] <= 'e') {
        return option_label(static_cast<std::size_t>(folded[0] - 'a'));
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (lower(options[i]).rfind(folded, 0) == 0) {
            return option_label(i);
        }
    }
    throw ExtractionError("answer '" + token + "' matches no option");
}

}  // namespace pmcts
