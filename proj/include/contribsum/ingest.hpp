#pragma once

#include <contribsum/gitstore.hpp>
#include <contribsum/timeutil.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

using git::ObjectId;

struct FileChange {
    enum class Kind { add, modify, remove, rename };
    Kind kind;
    std::string path;      // new path (or removed path for `remove`)
    std::string old_path;  // set for `rename`

    bool operator==(const FileChange&) const = default;
};

std::string_view to_string(FileChange::Kind kind);

struct CommitRecord {
    ObjectId hash;
    std::string author_name;
    std::string author_email;
    UtcTime authored_at;
    std::string message;
    std::vector<ObjectId> parents;
    bool is_merge = false;
    /// Relative to the first parent (empty tree for root commits).
    std::vector<FileChange> changed_files;
};

/// Half-open [start, end) interval over author dates.
struct AnalysisWindow {
    UtcTime start;
    UtcTime end;
    std::string label;

    /// Validates start < end.
    static AnalysisWindow make(UtcTime start, UtcTime end, std::string label);

    bool contains(UtcTime t) const noexcept { return start <= t && t < end; }
    bool operator==(const AnalysisWindow&) const = default;
};

struct TreeFile {
    std::string path;
    ObjectId blob;
    std::string mode;
};

struct SnapshotFile {
    std::string path;
    std::string content;

    bool operator==(const SnapshotFile&) const = default;
};

/// Read-only view of a local repository, pinned to one branch head.
/// Cheap to copy; copies share the underlying object store and caches.
class RepoHandle {
public:
    const std::filesystem::path& root_path() const noexcept { return root_path_; }
    const std::string& default_branch() const noexcept { return default_branch_; }
    const ObjectId& head_ref() const noexcept { return head_ref_; }

    const git::ObjectStore& store() const noexcept;

    /// Throws UnknownCommit when absent or not a commit.
    CommitRecord commit(const ObjectId& hash) const;
    git::CommitObject commit_object(const ObjectId& hash) const;

    /// Every blob reachable from the commit's tree, sorted bytewise by path.
    /// Submodule entries are skipped.
    std::vector<TreeFile> tree_files(const ObjectId& commit) const;

    std::string blob(const ObjectId& id) const;

    /// Tip of `refs/heads/<name>` or `refs/remotes/origin/<name>`.
    std::optional<ObjectId> branch_tip(const std::string& name) const;

    /// All commits reachable from `tip` (merge parents included).
    std::vector<ObjectId> reachable(const ObjectId& tip) const;

private:
    friend RepoHandle open_repo(const std::filesystem::path&, const std::optional<std::string>&);

    struct State;
    std::filesystem::path root_path_;
    std::string default_branch_;
    ObjectId head_ref_;
    std::shared_ptr<State> state_;
};

/// Opens a bare repository or a working tree (".git" directory or file).
/// Branch resolution: `branch`, else origin/HEAD, else HEAD, else main, master.
RepoHandle open_repo(const std::filesystem::path& path, const std::optional<std::string>& branch = std::nullopt);

/// Non-merge commits reachable from the head with author date inside the
/// window, ordered by (authored_at, hash).
std::vector<CommitRecord> list_commits(const RepoHandle& repo, const AnalysisWindow& window);

/// Full file tree at `at`, bytewise path order. Throws UnknownCommit.
std::vector<SnapshotFile> snapshot(const RepoHandle& repo, const ObjectId& at);

/// Newest commit on the head's first-parent chain authored before
/// window.end; nullopt when the branch has no such commit.
std::optional<ObjectId> window_end_commit(const RepoHandle& repo, const AnalysisWindow& window);

/// Rename threshold shared by commit diffs and blame.
inline constexpr double kRenameSimilarity = 0.5;

/// Changes between two trees (either may be empty) with rename detection.
std::vector<FileChange> diff_trees(const RepoHandle& repo, const std::vector<TreeFile>& old_tree,
                                   const std::vector<TreeFile>& new_tree);

}  // namespace contribsum
