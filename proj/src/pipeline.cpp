#include <contribsum/pipeline.hpp>

#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/identity.hpp>
#include <contribsum/metrics.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

namespace contribsum {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDeletedOnly =
    "Changed this file during the window, but none of those lines survive in the snapshot.";

// Line text each student owns per path, using the same owner rules as the
// contribution set (co-authored window lines go round robin).
std::map<std::pair<std::string, std::string>, std::string> owned_text(const RepoHandle& repo,
                                                                      const AnalysisWindow& window,
                                                                      const Roster& roster,
                                                                      const AttributionOptions& options,
                                                                      const std::vector<LineAttribution>& rows) {
    std::unordered_map<ObjectId, std::vector<std::string>> participants;
    if (options.coauthor_split) {
        auto key = [&](const std::string& name, const std::string& email) {
            auto s = resolve(roster, name, email);
            return s ? s->id : std::string(kUnmappedId);
        };
        for (const auto& c : list_commits(repo, window)) {
            std::vector<std::string> who{key(c.author_name, c.author_email)};
            for (const auto& tag : parse_coauthors(c.message, c.hash)) {
                auto k = key(tag.name, tag.email);
                if (std::find(who.begin(), who.end(), k) == who.end()) who.push_back(k);
            }
            if (who.size() > 1) participants.emplace(c.hash, std::move(who));
        }
    }
    std::map<std::pair<std::string, std::string>, std::string> out;
    std::map<std::pair<std::string, ObjectId>, std::size_t> round_robin;
    for (const auto& a : rows) {
        std::string owner = a.student ? a.student->id : std::string(kUnmappedId);
        if (window.contains(a.authored_at)) {
            if (auto it = participants.find(a.commit); it != participants.end()) {
                auto& counter = round_robin[{a.path, a.commit}];
                owner = it->second[counter % it->second.size()];
                ++counter;
            }
        }
        auto& text = out[{owner, a.path}];
        text += a.content;
        text += '\n';
    }
    return out;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

std::string timestamp_now() {
    return format_utc(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

}  // namespace

TeamResult analyze_team(const TeamInputs& in, Agents& agents) {
    TeamResult out;
    const auto repo = open_repo(in.repo, in.branch);
    out.set = build_contribution_set(repo, in.window, in.roster, in.attribution);
    const auto& set = out.set;

    std::vector<FileJob> file_jobs;
    std::map<std::pair<std::string, std::string>, std::string> owned;
    std::map<std::string, ObjectId> blob_of;
    if (set.snapshot_commit) {
        for (const auto& f : repo.tree_files(*set.snapshot_commit)) blob_of.emplace(f.path, f.blob);
        for (const auto& [path, ownership] : set.ownership) {
            const auto& blob = blob_of.at(path);
            auto content = repo.blob(blob);
            auto metrics = compute_metrics(path, content);
            file_jobs.push_back(FileJob{path, std::move(content), std::move(metrics), blob});
        }
        const auto rows = blame_snapshot(repo, *set.snapshot_commit, in.roster, in.attribution.excludes,
                                         in.attribution.max_file_bytes);
        owned = owned_text(repo, in.window, in.roster, in.attribution, rows);
    }

    out.functionality.rows = agents.summarize_files(file_jobs);
    std::map<std::string, const FunctionalityRow*> row_of;
    for (const auto& r : out.functionality.rows) row_of.emplace(r.path, &r);

    std::vector<ContributionJob> jobs;
    std::vector<ContributionRow> fixed;
    for (const auto& student : in.roster.students) {
        const auto* evidence = set.evidence_for(student.id);
        if (!evidence) continue;
        for (const auto& e : *evidence) {
            auto row = row_of.find(e.path);
            if (row == row_of.end() || (e.lines_owned == 0 && e.lines_added_in_window == 0)) {
                fixed.push_back(ContributionRow{student, e.path, std::string(kDeletedOnly), e});
                continue;
            }
            std::string text;
            if (auto it = owned.find({student.id, e.path}); it != owned.end()) text = it->second;
            // Scoped by file content so unchanged files hit the cache across weeks.
            jobs.push_back(ContributionJob{row->second, e, std::move(text), blob_of.at(e.path)});
        }
    }
    out.contributions.rows = agents.describe_contributions(jobs);
    for (auto& r : fixed) out.contributions.rows.push_back(std::move(r));
    std::sort(out.contributions.rows.begin(), out.contributions.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.student.id, a.path) < std::tie(b.student.id, b.path);
    });

    SynthesisBundle bundle;
    bundle.team = in.team;
    bundle.window = in.window;
    bundle.roster = in.roster.students;
    bundle.functionality = out.functionality;
    bundle.contributions = out.contributions;
    bundle.sprint_instructions = in.sprint_instructions;
    bundle.project_description = in.project_description;
    bundle.roles = in.roles;
    auto [summaries, team] = agents.synthesize(bundle, set.snapshot_commit.value_or("empty"));
    for (auto& s : summaries) s.validation = validate_summary(s, set);
    out.summaries = summaries;
    out.team_summary = team;

    RunMeta meta;
    meta.team = in.team;
    meta.window = in.window;
    meta.snapshot = set.snapshot_commit;
    meta.roles_enabled = in.roles;
    meta.unmapped_authors = set.unmapped_authors;
    meta.supplements = set.supplements;
    if (!set.snapshot_commit) meta.notes.push_back("no commits on the branch before the window end");
    meta.evidence = index_evidence(set);
    out.report = build_report(std::move(summaries), std::move(team), std::move(meta));
    out.markdown = render_markdown(out.report);
    return out;
}

std::vector<fs::path> write_team_outputs(const TeamResult& result, const fs::path& dir,
                                         const std::optional<ReportDocument>& prior) {
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, std::string_view bytes) {
        write_file_atomic(dir / name, bytes);
        written.push_back(dir / name);
    };
    write_csv(result.functionality, dir / "functionality.csv");
    written.push_back(dir / "functionality.csv");
    write_csv(result.contributions, dir / "contribution.csv");
    written.push_back(dir / "contribution.csv");
    put("contributions.json", serialize(result.set));
    json summaries = json::array();
    for (const auto& s : result.summaries) summaries.push_back(to_json(s));
    put("summaries.json", pretty(json{{"students", summaries}, {"team", to_json(result.team_summary)}}));
    put("report.json", pretty(to_json(result.report)));
    put("report.md", result.markdown);
    if (prior) {
        auto digest = diff_windows(*prior, result.report);
        std::string text = fmt::format("# Changes since {}\n\n", prior->window.label);
        text += digest.empty() ? "No change in attributed evidence.\n" : digest;
        put("delta.md", text);
    }
    return written;
}

std::optional<ReportDocument> find_prior_report(const fs::path& team_root, const AnalysisWindow& current) {
    std::optional<ReportDocument> best;
    std::error_code ec;
    if (!fs::is_directory(team_root, ec)) return best;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(team_root, ec)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
        if (d.filename() == current.label) continue;
        auto text = try_read_file(d / "report.json");
        if (!text) continue;
        ReportDocument doc;
        try {
            doc = report_from_json(json::parse(*text));
        } catch (const std::exception&) {
            continue;
        }
        if (doc.window.end > current.end) continue;
        if (!best || doc.window.end > best->window.end) best = std::move(doc);
    }
    return best;
}

std::string render_from_json(const fs::path& dir, const std::optional<fs::path>& prior_dir) {
    auto doc = report_from_json(json::parse(read_file(dir / "report.json")));
    auto markdown = render_markdown(doc);
    write_file_atomic(dir / "report.md", markdown);
    if (prior_dir) {
        auto prior = report_from_json(json::parse(read_file(*prior_dir / "report.json")));
        auto digest = diff_windows(prior, doc);
        std::string text = fmt::format("# Changes since {}\n\n", prior.window.label);
        text += digest.empty() ? "No change in attributed evidence.\n" : digest;
        write_file_atomic(dir / "delta.md", text);
    }
    return markdown;
}

std::shared_ptr<Provider> make_provider(const RunConfig& config) {
    std::vector<ModelTier> tiers{config.analysis, config.synthesis};
    auto http = [&] {
        HttpOptions o;
        o.endpoint = config.endpoint;
        o.api_key = config.api_key;
        return std::make_shared<HttpProvider>(o);
    };
    switch (config.provider) {
        case ProviderMode::mock:
            return std::make_shared<MockProvider>(tiers);
        case ProviderMode::replay:
            return std::make_shared<ReplayProvider>(resolve_path(config, config.replay_dir),
                                                    ReplayProvider::Mode::replay);
        case ProviderMode::record: {
            std::shared_ptr<Provider> inner;
            if (config.endpoint.empty()) {
                inner = std::make_shared<MockProvider>(tiers);
            } else {
                inner = http();
            }
            return std::make_shared<ReplayProvider>(resolve_path(config, config.replay_dir),
                                                    ReplayProvider::Mode::record, inner);
        }
        case ProviderMode::live:
            return http();
    }
    throw ConfigError("unknown provider mode");
}

bool RunResult::all_ok() const {
    return std::all_of(teams.begin(), teams.end(), [](const auto& t) { return t.ok; });
}

bool RunResult::any_ok() const {
    return std::any_of(teams.begin(), teams.end(), [](const auto& t) { return t.ok; });
}

namespace {

AttributionOptions attribution_options(const RunConfig& config) {
    auto o = AttributionOptions::defaults();
    o.coauthor_split = config.coauthor_split;
    for (const auto& g : config.excludes) o.excludes.push_back(g);
    o.include_branches = config.include_branches;
    return o;
}

std::string optional_text(const RunConfig& config, const fs::path& p) {
    if (p.empty()) return {};
    return read_file(resolve_path(config, p));
}

std::string make_run_id() {
    const auto now = std::chrono::system_clock::now();
    const auto nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(now.time_since_epoch()).count();
    auto stamp = timestamp_now();
    stamp.erase(std::remove_if(stamp.begin(), stamp.end(), [](char c) { return c == '-' || c == ':'; }),
                stamp.end());
    return stamp + "-" + sha256_hex(std::to_string(nanos)).substr(0, 8);
}

}  // namespace

RunResult run_analysis(const RunConfig& config, std::shared_ptr<Provider> provider, const LogSink& log) {
    validate(config);
    RunResult result;
    result.run_id = make_run_id();
    result.window = resolve_window(config);

    const auto roster = load_roster(read_file(resolve_path(config, config.roster)));
    const auto sprint = optional_text(config, config.sprint_instructions);
    const auto project = optional_text(config, config.project_description);
    const auto output = resolve_path(config, config.output_dir);
    const auto state = resolve_state_dir(resolve_path(config, config.state_dir));

    std::mutex log_mutex;
    auto say = [&](const std::string& line) {
        if (!log) return;
        std::lock_guard lock(log_mutex);
        log(line);
    };

    CostLedger ledger(state.ledger());
    Cache cache(state.cache(), [&](const std::string& w) { say("warning: " + w); });
    AgentOptions options;
    options.analysis = config.analysis;
    options.synthesis = config.synthesis;
    options.clip_keep = config.clip_keep;
    options.concurrency = config.agent_concurrency;
    options.requests_per_second = config.requests_per_second;
    options.run_id = result.run_id;
    Agents agents(*provider, ledger, &cache, options);

    result.teams.resize(config.teams.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < config.teams.size();) {
            const auto& team = config.teams[i];
            auto& outcome = result.teams[i];
            outcome.team = team.id;
            outcome.dir = output / team.id / result.window.label;
            try {
                TeamInputs in;
                in.team = team.id;
                in.repo = resolve_path(config, team.path);
                in.branch = config.branch;
                in.roster = roster;
                in.window = result.window;
                in.sprint_instructions = sprint;
                in.project_description = project;
                in.attribution = attribution_options(config);
                in.roles = config.roles;
                say(fmt::format("{}: analyzing {}", team.id, in.repo.string()));
                auto analyzed = analyze_team(in, agents);
                auto prior = find_prior_report(output / team.id, result.window);
                outcome.artifacts = write_team_outputs(analyzed, outcome.dir, prior);
                outcome.unmapped_authors = analyzed.set.unmapped_authors;
                outcome.ok = true;
                say(fmt::format("{}: wrote {}", team.id, outcome.dir.string()));
            } catch (const std::exception& e) {
                outcome.error = e.what();
                say(fmt::format("{}: failed: {}", team.id, e.what()));
            }
        }
    };
    const auto threads = std::min(std::max<std::size_t>(config.team_concurrency, 1), config.teams.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    result.cost = ledger.totals_for_run(result.run_id);
    result.stats = agents.stats();

    json teams = json::array();
    for (const auto& t : result.teams) {
        json artifacts = json::object();
        for (const auto& p : t.artifacts) {
            artifacts[fs::relative(p, output).generic_string()] = sha256_hex(read_file(p));
        }
        json entry{{"team", t.team}, {"status", t.ok ? "ok" : "failed"}, {"artifacts", artifacts}};
        if (!t.ok) entry["error"] = t.error;
        teams.push_back(entry);
    }
    json cost{{"total", result.cost.total},
              {"calls", result.cost.calls},
              {"input_tokens", result.cost.input_tokens},
              {"output_tokens", result.cost.output_tokens}};
    for (const auto& [tier, amount] : result.cost.per_tier) cost[std::string(to_string(tier))] = amount;
    json manifest{{"run_id", result.run_id},
                  {"finished_at", timestamp_now()},
                  {"provider", provider->name()},
                  {"window",
                   {{"label", result.window.label},
                    {"start", format_utc(result.window.start)},
                    {"end", format_utc(result.window.end)}}},
                  {"config", to_json(config)},
                  {"teams", teams},
                  {"cost", cost},
                  {"provider_calls", result.stats.provider_calls},
                  {"cache_hits", result.stats.cache_hits},
                  {"repairs", result.stats.repairs}};
    result.manifest = output / "run-manifest.json";
    write_file_atomic(result.manifest, pretty(manifest));
    return result;
}

std::vector<TeamOutcome> check_authors(const RunConfig& config) {
    validate(config);
    const auto window = resolve_window(config);
    const auto roster = load_roster(read_file(resolve_path(config, config.roster)));
    std::vector<TeamOutcome> out;
    for (const auto& team : config.teams) {
        TeamOutcome o;
        o.team = team.id;
        try {
            const auto repo = open_repo(resolve_path(config, team.path), config.branch);
            std::set<std::string> unknown;
            for (const auto& c : list_commits(repo, window)) {
                if (!resolve(roster, c.author_name, c.author_email)) {
                    unknown.insert(c.author_name + " <" + c.author_email + ">");
                }
                for (const auto& tag : parse_coauthors(c.message, c.hash)) {
                    if (!resolve(roster, tag.name, tag.email)) unknown.insert(tag.name + " <" + tag.email + ">");
                }
            }
            o.unmapped_authors.assign(unknown.begin(), unknown.end());
            o.ok = true;
        } catch (const std::exception& e) {
            o.error = e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace contribsum
