#include <contribsum/config.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/identity.hpp>
#include <contribsum/pipeline.hpp>
#include <contribsum/store.hpp>
#include <contribsum/synthfix.hpp>
#include <contribsum/templates.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace contribsum;

namespace {

enum Exit { kOk = 0, kPartial = 1, kConfig = 2 };

// Command-line values that override the config file when given.
struct Overrides {
    std::optional<int> week;
    std::optional<std::string> window_start;
    std::optional<std::string> window_end;
    std::optional<std::string> label;
    std::optional<std::string> provider;
    std::optional<std::string> replay_dir;
    bool roles = false;
    bool no_coauthor_split = false;
    std::vector<std::string> include_branches;
    std::vector<std::string> excludes;
    std::optional<std::string> output;
    std::optional<std::string> state;
    std::optional<std::size_t> concurrency;
    std::optional<std::string> branch;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--week", o.week, "Week N from the configured sprint start");
    cmd->add_option("--window-start", o.window_start, "Window start (YYYY-MM-DD or ISO-8601 UTC)");
    cmd->add_option("--window-end", o.window_end, "Window end, exclusive");
    cmd->add_option("--label", o.label, "Window label used for the output directory");
    cmd->add_option("--provider", o.provider, "mock, replay, record or live");
    cmd->add_option("--replay-dir", o.replay_dir, "Recorded exchanges for replay/record");
    cmd->add_flag("--roles", o.roles, "Assign a business role per student");
    cmd->add_flag("--no-coauthor-split", o.no_coauthor_split, "Credit only the committing author");
    cmd->add_option("--include-branch", o.include_branches, "Report unmerged lines on this branch")->take_all();
    cmd->add_option("--exclude", o.excludes, "Extra exclude glob")->take_all();
    cmd->add_option("--output", o.output, "Output directory");
    cmd->add_option("--state", o.state, "State directory (cache and ledger)");
    cmd->add_option("--concurrency", o.concurrency, "Teams processed at once");
    cmd->add_option("--branch", o.branch, "Branch to analyze instead of the default");
}

ProviderMode provider_from(const std::string& text) {
    if (text == "mock") return ProviderMode::mock;
    if (text == "replay") return ProviderMode::replay;
    if (text == "record") return ProviderMode::record;
    if (text == "live") return ProviderMode::live;
    throw ConfigError("unknown provider: " + text);
}

RunConfig load(const std::string& path, const Overrides& o) {
    auto config = load_config(path);
    fs::path cwd = fs::current_path();
    // Paths given on the command line are relative to the working directory.
    auto from_cli = [&](const std::string& p) { return fs::absolute(cwd / p); };
    if (o.week) {
        config.week = *o.week;
        config.window_start.reset();
        config.window_end.reset();
    }
    try {
        if (o.window_start) config.window_start = parse_utc(*o.window_start);
        if (o.window_end) config.window_end = parse_utc(*o.window_end);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (o.window_start || o.window_end) config.week.reset();
    if (o.label) config.window_label = *o.label;
    if (o.provider) config.provider = provider_from(*o.provider);
    if (o.replay_dir) config.replay_dir = from_cli(*o.replay_dir);
    if (o.roles) config.roles = true;
    if (o.no_coauthor_split) config.coauthor_split = false;
    for (const auto& b : o.include_branches) config.include_branches.push_back(b);
    for (const auto& g : o.excludes) config.excludes.push_back(g);
    if (o.output) config.output_dir = from_cli(*o.output);
    if (o.state) config.state_dir = from_cli(*o.state);
    if (o.concurrency) config.team_concurrency = *o.concurrency;
    if (o.branch) config.branch = *o.branch;
    validate(config);
    return config;
}

int cmd_analyze(const std::string& config_path, const Overrides& o) {
    auto config = load(config_path, o);
    auto provider = make_provider(config);
    auto result = run_analysis(config, provider, [](const std::string& line) { std::cerr << line << "\n"; });
    std::cout << fmt::format("window {} [{}, {})\n", result.window.label, format_utc(result.window.start),
                             format_utc(result.window.end));
    for (const auto& t : result.teams) {
        if (t.ok) {
            std::cout << fmt::format("  {}: ok ({} files) -> {}\n", t.team, t.artifacts.size(), t.dir.string());
        } else {
            std::cout << fmt::format("  {}: FAILED: {}\n", t.team, t.error);
        }
    }
    std::cout << fmt::format("provider calls {}, cache hits {}, repairs {}, cost {}\n", result.stats.provider_calls,
                             result.stats.cache_hits, result.stats.repairs, format_currency(result.cost.total));
    std::cout << "manifest " << result.manifest.string() << "\n";
    return result.all_ok() ? kOk : kPartial;
}

int cmd_check(const std::string& config_path, const Overrides& o) {
    auto config = load(config_path, o);
    int status = kOk;
    try {
        auto roster = load_roster(read_file(resolve_path(config, config.roster)));
        std::cout << fmt::format("roster: {} students\n", roster.students.size());
    } catch (const Error& e) {
        std::cout << "roster: " << e.what() << "\n";
        return kConfig;
    }
    for (const auto& name : {"system.v1", "functionality.v1", "contribution.v1", "student_summary.v1",
                             "team_summary.v1", "repair.v1"}) {
        try {
            prompt_template(name);
        } catch (const Error& e) {
            std::cout << "template " << name << ": " << e.what() << "\n";
            status = kPartial;
        }
    }
    for (const auto& t : check_authors(config)) {
        if (!t.ok) {
            std::cout << fmt::format("{}: cannot open repository: {}\n", t.team, t.error);
            status = kPartial;
            continue;
        }
        if (t.unmapped_authors.empty()) {
            std::cout << fmt::format("{}: ok\n", t.team);
        } else {
            std::cout << fmt::format("{}: warning: unmapped authors\n", t.team);
            for (const auto& a : t.unmapped_authors) std::cout << "    " << a << "\n";
        }
    }
    if (config.provider == ProviderMode::live ||
        (config.provider == ProviderMode::record && !config.endpoint.empty())) {
        HttpOptions http;
        http.endpoint = config.endpoint;
        http.api_key = config.api_key;
        std::string detail;
        if (HttpProvider(http).reachable(&detail)) {
            std::cout << "provider: reachable\n";
        } else {
            std::cout << "provider: unreachable: " << detail << "\n";
            status = kPartial;
        }
    }
    if (status == kOk) std::cout << "ok\n";
    return status;
}

int cmd_cost(const std::optional<std::string>& config_path, const std::optional<std::string>& state,
             const std::optional<std::string>& run) {
    fs::path dir = ".contribsum";
    if (config_path) {
        auto config = load_config(*config_path);
        dir = resolve_path(config, config.state_dir);
    }
    if (state) dir = fs::absolute(*state);
    auto paths = resolve_state_dir(dir);
    CostLedger ledger(paths.ledger());
    std::cout << ledger_report(ledger, run);
    return kOk;
}

int cmd_render(const std::string& dir, const std::optional<std::string>& prior) {
    std::optional<fs::path> prior_dir;
    if (prior) prior_dir = fs::path(*prior);
    std::cout << render_from_json(dir, prior_dir);
    return kOk;
}

int cmd_fixture(const std::string& name, const std::string& dest) {
    std::string text;
    if (fs::exists(name)) {
        text = read_file(name);
    } else {
        text = synthfix::fixture_text(name);
    }
    auto script = synthfix::parse_script(text);
    auto built = synthfix::build(script, fs::path(dest) / "repo.git");
    write_file_atomic(fs::path(dest) / "roster.txt", script.roster_text);
    std::cout << fmt::format("{}: head {} ({} commits scripted)\n", script.name, built.repo.head_ref(),
                             script.steps.size());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-student contribution reports from team git repositories"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;

    auto* analyze = app.add_subcommand("analyze", "Run the pipeline and write reports");
    analyze->add_option("--config,-c", config_path, "Run configuration file")->required();
    add_overrides(analyze, overrides);

    auto* check = app.add_subcommand("check", "Pre-flight checks without completion calls");
    check->add_option("--config,-c", config_path, "Run configuration file")->required();
    add_overrides(check, overrides);

    std::optional<std::string> cost_config, cost_state, cost_run;
    auto* cost = app.add_subcommand("cost", "Print the cost ledger");
    cost->add_option("--config,-c", cost_config, "Run configuration file");
    cost->add_option("--state", cost_state, "State directory");
    cost->add_option("--run", cost_run, "Also report one run id");

    std::string render_dir;
    std::optional<std::string> render_prior;
    auto* render = app.add_subcommand("render", "Re-render report.md from report.json");
    render->add_option("dir", render_dir, "Output directory of one team and window")->required();
    render->add_option("--prior", render_prior, "Earlier window directory for delta.md");

    std::string fixture_name, fixture_dest;
    auto* fixture = app.add_subcommand("fixture", "Write a synthetic fixture repository");
    fixture->add_option("name", fixture_name, "Shipped fixture name or a script file")->required();
    fixture->add_option("dest", fixture_dest, "Destination directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) return cmd_analyze(config_path, overrides);
        if (*check) return cmd_check(config_path, overrides);
        if (*cost) return cmd_cost(cost_config, cost_state, cost_run);
        if (*render) return cmd_render(render_dir, render_prior);
        if (*fixture) return cmd_fixture(fixture_name, fixture_dest);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPartial;
    }
    return kOk;
}
