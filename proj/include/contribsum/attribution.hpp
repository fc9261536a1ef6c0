#pragma once

#include <contribsum/identity.hpp>
#include <contribsum/ingest.hpp>

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

struct LineAttribution {
    std::string path;
    std::size_t line_no = 0;  // 1-based
    std::string content;
    std::optional<StudentId> student;  // nullopt: author not in roster
    ObjectId commit;
    UtcTime authored_at;
    std::string author_name;
    std::string author_email;
};

struct SoloFunction {
    std::string name;
    int complexity = 1;

    bool operator==(const SoloFunction&) const = default;
};

struct ContributionEvidence {
    StudentId student;
    std::string path;
    std::size_t lines_owned = 0;
    /// Owned lines that are neither blank nor comment-only.
    std::size_t code_lines_owned = 0;
    std::size_t lines_added_in_window = 0;
    std::vector<std::string> commit_messages;
    std::vector<SoloFunction> solo_functions;

    bool operator==(const ContributionEvidence&) const = default;
};

struct FileOwnership {
    std::size_t line_count = 0;  // attributed lines in the window-end snapshot
    /// student id (or "unmapped") -> owned lines
    std::map<std::string, std::size_t> owners;

    bool operator==(const FileOwnership&) const = default;
};

struct BranchSupplement {
    std::string branch;
    ObjectId tip;
    /// Lines present at the branch tip but written by commits the default
    /// branch cannot reach, keyed by student id then path.
    std::map<std::string, std::map<std::string, std::size_t>> unmerged_lines;

    bool operator==(const BranchSupplement&) const = default;
};

struct ContributionSet {
    AnalysisWindow window;
    std::optional<ObjectId> snapshot_commit;
    /// Students with window activity (own commits or co-author credit).
    std::map<std::string, std::vector<ContributionEvidence>> per_student;
    std::vector<StudentId> zero_commit_students;
    /// Evidence aggregated under the reserved unmapped pseudo-student.
    std::vector<ContributionEvidence> unmapped;
    /// "Name <email>" of every unresolved signature seen in the window.
    std::vector<std::string> unmapped_authors;
    std::map<std::string, FileOwnership> ownership;
    std::vector<BranchSupplement> supplements;

    const std::vector<ContributionEvidence>* evidence_for(std::string_view student_id) const;
    const ContributionEvidence* evidence_for(std::string_view student_id, std::string_view path) const;
};

struct AttributionOptions {
    bool coauthor_split = true;
    std::vector<std::string> excludes;
    std::size_t max_file_bytes = std::size_t(1) << 20;
    std::vector<std::string> include_branches;

    static AttributionOptions defaults();
};

/// Lockfiles, vendored dependencies, build output and similar generated paths.
std::vector<std::string> default_excludes();

/// fnmatch-style globs; patterns without '/' also match the basename.
bool is_excluded(std::string_view path, const std::vector<std::string>& globs);

/// Last-writer-wins line ownership of every non-excluded text file at `at`.
/// Merge commits are transparent; renames are followed at 50% similarity.
std::vector<LineAttribution> blame_snapshot(const RepoHandle& repo, const ObjectId& at, const Roster& roster,
                                            const std::vector<std::string>& excludes,
                                            std::size_t max_file_bytes = std::size_t(1) << 20);

ContributionSet build_contribution_set(const RepoHandle& repo, const AnalysisWindow& window, const Roster& roster,
                                       const AttributionOptions& options);

struct Churn {
    std::size_t lines_added = 0;
    std::size_t lines_deleted = 0;

    bool operator==(const Churn&) const = default;
};

/// Per student id ("unmapped" included when relevant), over all non-merge
/// window commits on the default branch.
std::map<std::string, Churn> churn_stats(const RepoHandle& repo, const AnalysisWindow& window, const Roster& roster);

/// Lines on `branch` that the default branch does not contain.
BranchSupplement branch_supplement(const RepoHandle& repo, const std::string& branch, const Roster& roster,
                                   const AttributionOptions& options);

nlohmann::json to_json(const ContributionSet& set);
ContributionSet contribution_set_from_json(const nlohmann::json& doc);

/// Canonical serialization (sorted keys, two-space indent, trailing newline).
std::string serialize(const ContributionSet& set);

}  // namespace contribsum
