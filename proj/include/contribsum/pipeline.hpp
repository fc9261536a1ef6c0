#pragma once

#include <contribsum/agents.hpp>
#include <contribsum/attribution.hpp>
#include <contribsum/config.hpp>
#include <contribsum/providers.hpp>
#include <contribsum/report.hpp>
#include <contribsum/tables.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

struct TeamInputs {
    std::string team;
    std::filesystem::path repo;
    std::optional<std::string> branch;
    Roster roster;
    AnalysisWindow window;
    std::string sprint_instructions;
    std::string project_description;
    AttributionOptions attribution;
    bool roles = false;
};

struct TeamResult {
    ContributionSet set;
    FunctionalityTable functionality;
    ContributionTable contributions;
    std::vector<StudentSummary> summaries;
    TeamSummary team_summary;
    ReportDocument report;
    std::string markdown;
};

/// Ingest, attribute, measure, then run the prompt chain for one team.
TeamResult analyze_team(const TeamInputs& in, Agents& agents);

/// Writes the team's artifacts into `dir` (created when missing) and
/// returns the written paths. A delta against `prior` is written when given.
std::vector<std::filesystem::path> write_team_outputs(const TeamResult& result, const std::filesystem::path& dir,
                                                      const std::optional<ReportDocument>& prior);

/// Newest earlier report under `team_root/<label>/report.json`: windows
/// ending no later than `current`, its own label excluded.
std::optional<ReportDocument> find_prior_report(const std::filesystem::path& team_root,
                                                const AnalysisWindow& current);

/// Re-renders report.md (and delta.md when `prior_dir` is given) from the
/// report.json in `dir` without any provider call. Returns the Markdown.
std::string render_from_json(const std::filesystem::path& dir,
                             const std::optional<std::filesystem::path>& prior_dir = std::nullopt);

/// Mock, replay, record (live inner provider when an endpoint is set, else
/// the mock) or live.
std::shared_ptr<Provider> make_provider(const RunConfig& config);

struct TeamOutcome {
    std::string team;
    bool ok = false;
    std::string error;
    std::filesystem::path dir;
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> unmapped_authors;
};

struct RunResult {
    std::string run_id;
    AnalysisWindow window;
    std::vector<TeamOutcome> teams;
    std::filesystem::path manifest;
    LedgerTotals cost;
    AgentStats stats;

    bool all_ok() const;
    bool any_ok() const;
};

using LogSink = std::function<void(const std::string&)>;

/// Runs every configured team; one team's failure never stops the others.
/// Writes <output>/<team>/<label>/... and <output>/run-manifest.json.
RunResult run_analysis(const RunConfig& config, std::shared_ptr<Provider> provider, const LogSink& log = {});

/// Ingest and identity pass only: unresolved "Name <email>" per team.
std::vector<TeamOutcome> check_authors(const RunConfig& config);

}  // namespace contribsum
