#pragma once

#include <contribsum/agents.hpp>
#include <contribsum/attribution.hpp>

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

struct EvidenceDigest {
    std::size_t lines_owned = 0;
    std::size_t lines_added_in_window = 0;

    bool operator==(const EvidenceDigest&) const = default;
};

/// student id -> path -> counts
using EvidenceIndex = std::map<std::string, std::map<std::string, EvidenceDigest>>;

EvidenceIndex index_evidence(const ContributionSet& set);

struct RunMeta {
    std::string team;
    AnalysisWindow window;
    std::optional<ObjectId> snapshot;
    bool roles_enabled = false;
    std::vector<std::string> unmapped_authors;
    std::vector<BranchSupplement> supplements;
    std::vector<std::string> notes;  // extra warnings from the run
    EvidenceIndex evidence;
};

struct ReportDocument {
    std::string team;
    AnalysisWindow window;
    std::optional<ObjectId> snapshot;
    bool roles_enabled = false;
    std::vector<StudentSummary> student_sections;  // by display name, then id
    TeamSummary team_section;
    std::vector<BranchSupplement> supplements;
    std::vector<std::string> warnings;
    EvidenceIndex evidence;

    bool operator==(const ReportDocument&) const = default;
};

inline constexpr std::string_view kRoleDisclaimer =
    "_Role labels are generated automatically from this window's contributions. They are not comparable across "
    "teams and are not an assessment._";

/// Orders sections and collects warnings (validation flags, unmapped
/// authors, unmerged branches, run notes).
ReportDocument build_report(std::vector<StudentSummary> summaries, TeamSummary team, RunMeta meta);

std::string render_markdown(const ReportDocument& doc);

/// build_report followed by render_markdown.
std::string render(std::vector<StudentSummary> summaries, TeamSummary team, RunMeta meta);

/// Per-student newly touched files and evidence changes; empty when the
/// evidence is identical. Throws TeamMismatch.
std::string diff_windows(const ReportDocument& earlier, const ReportDocument& later);

nlohmann::json to_json(const StudentSummary& s);
StudentSummary student_summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TeamSummary& t);
TeamSummary team_summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReportDocument& doc);
ReportDocument report_from_json(const nlohmann::json& j);

}  // namespace contribsum
