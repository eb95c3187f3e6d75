#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "pmcts/config.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/eval.hpp"
#include "pmcts/model.hpp"
#include "pmcts/search.hpp"
#include "pmcts/synthetic.hpp"

namespace pmcts::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
    std::string config_path;
    std::string scripted_path;
    ConfigOverrides overrides;
};

struct SolveFlags {
    std::string question;
    std::string trace_path;
};

struct EvalFlags {
    std::vector<std::string> datasets;
    std::string strategy;
};

struct BenchFlags {
    std::string spec_path;
    int runs = 100;
    int budget = 200;
    bool vary_trees = false;
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
}

AppConfig resolve(const GlobalFlags& flags) {
    std::optional<fs::path> file;
    if (!flags.config_path.empty()) {
        file = flags.config_path;
    }
    return resolve_config(file, flags.overrides);
}

std::shared_ptr<Model> make_model(const GlobalFlags& flags, const AppConfig& config) {
    if (!flags.scripted_path.empty()) {
        return scripted_model(ScriptedModel::load_script(flags.scripted_path));
    }
    if (config.model.endpoint.empty()) {
        throw ConfigError("no model endpoint configured (set model.endpoint or pass --endpoint) and no --scripted file");
    }
    HttpModelOptions options;
    options.endpoint = config.model.endpoint;
    options.timeout = std::chrono::seconds(config.model.timeout_s);
    options.connection_limit = config.model.connection_limit;
    if (const char* key = std::getenv(config.model.api_key_env.c_str())) {
        options.api_key = key;
    }
    auto backend = std::make_shared<HttpModel>(std::move(options));
    auto cache = std::make_shared<ResponseCache>(fs::path(config.paths.cache_dir) / "responses.cache");
    return std::make_shared<CachingModel>(std::move(backend), std::move(cache));
}

PromptSet load_prompts(const AppConfig& config) {
    return config.paths.prompts_dir.empty() ? PromptSet::builtin() : PromptSet::load(config.paths.prompts_dir);
}

int cmd_solve(const GlobalFlags& flags, const SolveFlags& solve, std::ostream& out, std::ostream& err) {
    const AppConfig config = resolve(flags);
    const std::shared_ptr<Model> model = make_model(flags, config);
    const PromptSet prompts = load_prompts(config);

    SearchResult result;
    try {
        result = run_search(solve.question, config.search_config(), *model, prompts);
    } catch (const SearchAbortedError& e) {
        const fs::path partial = solve.trace_path.empty() ? fs::path(config.paths.report_dir) / "partial-trace.jsonl"
                                                          : fs::path(solve.trace_path);
        write_file(partial, e.partial_trace());
        err << "error: " << e.what() << "\npartial trace: " << partial.string() << '\n';
        return kExitSearchAborted;
    }

    out << "Answer: " << result.answer << '\n';
    out << "Steps:\n";
    for (std::size_t i = 0; i < result.steps.size(); ++i) {
        out << "  " << (i + 1) << ". " << result.steps[i] << '\n';
    }
    char q[32];
    std::snprintf(q, sizeof(q), "%.4f", result.best_q);
    out << "Root visits: " << result.root_visits << "  best Q: " << q << '\n';
    out << "Rollouts: greedy=" << result.policy_counts[SimulationPolicy::Greedy]
        << " random=" << result.policy_counts[SimulationPolicy::Random] << '\n';
    if (result.fell_back) {
        out << "note: no terminal chain was visited; answer taken from the chain-of-thought fallback\n";
    }
    if (!solve.trace_path.empty()) {
        write_file(solve.trace_path, result.trace);
        out << "Trace: " << solve.trace_path << '\n';
    }
    return kExitOk;
}

int cmd_eval(const GlobalFlags& flags, const EvalFlags& eval, std::ostream& out, std::ostream& err) {
    GlobalFlags effective = flags;
    if (!eval.strategy.empty()) {
        const auto strategy = parse_strategy(eval.strategy);
        if (!strategy) {
            throw ConfigError("--strategy must be 'improved-mcts' or 'cot'");
        }
        effective.overrides.strategy = strategy;
    }
    const AppConfig config = resolve(effective);
    const std::vector<std::string>& paths = eval.datasets.empty() ? config.eval.datasets : eval.datasets;
    if (paths.empty()) {
        throw ConfigError("no dataset given");
    }

    std::vector<TaskRecord> tasks;
    std::set<std::string> ids;
    for (const std::string& path : paths) {
        try {
            for (TaskRecord& task : load_dataset(path)) {
                if (!ids.insert(task.id).second) {
                    err << "error: " << path << ": duplicate task id '" << task.id << "' across datasets\n";
                    return kExitData;
                }
                tasks.push_back(std::move(task));
            }
        } catch (const DatasetError& e) {
            err << "error: " << path << ":" << e.line() << ": " << e.what() << '\n';
            return kExitData;
        }
    }
    if (tasks.empty()) {
        err << "error: datasets contain no tasks\n";
        return kExitData;
    }

    const std::shared_ptr<Model> model = make_model(flags, config);
    const PromptSet prompts = load_prompts(config);
    EvalOptions options;
    options.strategy = config.eval.strategy;
    options.search = config.search_config();
    options.parallelism = config.eval.parallelism;
    options.prompts = &prompts;

    RunReport report;
    try {
        report = run_eval(tasks, options, *model);
    } catch (const SearchAbortedError& e) {
        const fs::path partial = fs::path(config.paths.report_dir) / "partial-trace.jsonl";
        write_file(partial, e.partial_trace());
        err << "error: " << e.what() << "\npartial trace: " << partial.string() << '\n';
        return kExitSearchAborted;
    }

    const fs::path report_dir = config.paths.report_dir;
    write_file(report_dir / "report.json", report.to_json(false));
    write_file(report_dir / "summary.csv", report.to_csv());
    out << report.to_csv();
    out << "strategy: " << report.strategy << "  macro average: " << format2(report.macro_average) << '\n';
    char wall[48];
    std::snprintf(wall, sizeof(wall), "wall time: %.2fs\n", report.wall_time_s);
    err << wall;
    return kExitOk;
}

struct BenchRow {
    std::string variant;
    int runs = 0;
    int root_hits = 0;
    int leaf_hits = 0;
    double regret_sum = 0.0;
};

int cmd_bench(const GlobalFlags& flags, const BenchFlags& bench, std::ostream& out) {
    const AppConfig config = resolve(flags);
    SyntheticTreeSpec base = bench.spec_path.empty() ? SyntheticTreeSpec::random(3, 3, config.search.seed, 0.2)
                                                     : SyntheticTreeSpec::load(bench.spec_path);
    if (bench.runs < 1 || bench.budget < 1) {
        throw ConfigError("--runs and --budget must be >= 1");
    }

    MctsConfig dynamic = config.search_config();
    dynamic.iterations = bench.budget;
    MctsConfig fixed = dynamic;
    fixed.kappa = 0.0;

    std::vector<BenchRow> rows = {{"dynamic-c"}, {"fixed-c"}};
    for (int run = 0; run < bench.runs; ++run) {
        const SyntheticTreeSpec spec =
            bench.vary_trees ? SyntheticTreeSpec::random(base.depth, base.branching, base.seed + static_cast<std::uint64_t>(run),
                                                         base.margin.value_or(0.2))
                             : base;
        const Optimum optimum = known_optimum(spec);
        SyntheticModel model(spec);
        for (BenchRow& row : rows) {
            MctsConfig cfg = row.variant == "dynamic-c" ? dynamic : fixed;
            cfg.seed = config.search.seed + static_cast<std::uint64_t>(run);
            const SearchResult result = run_search(spec.problem_text(), cfg, model);
            std::vector<int> path;
            for (const std::string& step : result.steps) {
                for (int branch : decode_branch_path(step)) path.push_back(branch);
            }
            double reached = 0.0;
            if (path.size() == static_cast<std::size_t>(spec.depth)) {
                reached = spec.reward(path);
            }
            ++row.runs;
            row.root_hits += !path.empty() && path.front() == optimum.path.front();
            row.leaf_hits += path == optimum.path;
            row.regret_sum += optimum.reward - reached;
        }
    }

    char line[160];
    std::snprintf(line, sizeof(line), "spec: depth=%d branching=%d leaves=%zu budget=%d runs=%d%s\n", base.depth,
                  base.branching, base.leaf_count(), bench.budget, bench.runs, bench.vary_trees ? " (varied trees)" : "");
    out << line;
    out << "variant,runs,root_hit_rate,leaf_hit_rate,mean_regret\n";
    for (const BenchRow& row : rows) {
        std::snprintf(line, sizeof(line), "%s,%d,%.4f,%.4f,%.6f\n", row.variant.c_str(), row.runs,
                      static_cast<double>(row.root_hits) / row.runs, static_cast<double>(row.leaf_hits) / row.runs,
                      row.regret_sum / row.runs);
        out << line;
    }
    return kExitOk;
}

void add_search_flags(CLI::App& cmd, GlobalFlags& flags) {
    auto& o = flags.overrides;
    cmd.add_option("--iterations", o.iterations, "Search iterations per problem (default 32)");
    cmd.add_option("--width", o.expand_width, "Children proposed per expansion (default 3)");
    cmd.add_option("--depth", o.max_depth, "Maximum reasoning depth (default 8)");
    cmd.add_option("--c0", o.c0, "Initial exploration weight (default 1.414)");
    cmd.add_option("--kappa", o.kappa, "Exploration decay rate; 0 keeps c fixed (default 0.5)");
    cmd.add_option("--threshold", o.complexity_threshold, "Token count at which rollouts turn greedy (default 60)");
    cmd.add_option("--temperature", o.rollout_temperature, "Random-rollout sampling temperature (default 0.7)");
}

void add_model_flags(CLI::App& cmd, GlobalFlags& flags) {
    auto& o = flags.overrides;
    cmd.add_option("--endpoint", o.endpoint, "Chat-completions URL");
    cmd.add_option("--model", o.model_name, "Model name sent to the endpoint");
    cmd.add_option("--cache-dir", o.cache_dir, "Directory of the response cache");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Prompt-driven Monte Carlo tree search over a chat model.\n"
                 "The endpoint credential is read from the environment variable named by model.api_key_env "
                 "(default PMCTS_API_KEY) and sent as a bearer token.",
                 "pmcts"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "JSON config file");
    app.add_option("--seed", flags.overrides.seed, "Search seed");
    app.add_option("--scripted", flags.scripted_path, "Replay model replies from a JSON script instead of a backend");

    SolveFlags solve;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Search for the answer to one question");
    solve_cmd->add_option("question", solve.question, "Question text")->required();
    solve_cmd->add_option("--trace", solve.trace_path, "Write the search tree export to this file");
    add_search_flags(*solve_cmd, flags);
    add_model_flags(*solve_cmd, flags);
    solve_cmd->add_option("--report-dir", flags.overrides.report_dir, "Directory for partial traces");

    EvalFlags eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a strategy over JSON-lines datasets");
    eval_cmd->add_option("datasets", eval.datasets, "Dataset files (one part per file by default)");
    eval_cmd->add_option("--strategy", eval.strategy, "improved-mcts (default) or cot");
    eval_cmd->add_option("--parallelism", flags.overrides.parallelism, "Tasks run concurrently");
    eval_cmd->add_option("--report-dir", flags.overrides.report_dir, "Directory for report.json and summary.csv");
    add_search_flags(*eval_cmd, flags);
    add_model_flags(*eval_cmd, flags);

    BenchFlags bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Measure convergence on synthetic reward trees");
    bench_cmd->add_option("spec", bench.spec_path, "Synthetic tree spec (JSON); default depth 3, branching 3, margin 0.2");
    bench_cmd->add_option("--runs", bench.runs, "Seeded runs per variant (default 100)");
    bench_cmd->add_option("--budget", bench.budget, "Iterations per search (default 200)");
    bench_cmd->add_flag("--vary-trees", bench.vary_trees, "Draw a fresh tree per run from the spec's seed and margin");
    add_search_flags(*bench_cmd, flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (solve_cmd->parsed()) return cmd_solve(flags, solve, out, err);
        if (eval_cmd->parsed()) return cmd_eval(flags, eval, out, err);
        if (bench_cmd->parsed()) return cmd_bench(flags, bench, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SpecError& e) {
        err << "spec error: " << e.what() << '\n';
        return kExitData;
    } catch (const DatasetError& e) {
        err << "dataset error: " << e.what() << '\n';
        return kExitData;
    } catch (const TemplateError& e) {
        err << "template error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace pmcts::cli
