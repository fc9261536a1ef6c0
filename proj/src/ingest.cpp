#include <contribsum/error.hpp>
#include <contribsum/ingest.hpp>
#include <contribsum/linediff.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace contribsum {

namespace fs = std::filesystem;

std::string_view to_string(FileChange::Kind kind) {
    switch (kind) {
        case FileChange::Kind::add: return "add";
        case FileChange::Kind::modify: return "modify";
        case FileChange::Kind::remove: return "delete";
        case FileChange::Kind::rename: return "rename";
    }
    return "?";
}

AnalysisWindow AnalysisWindow::make(UtcTime start, UtcTime end, std::string label) {
    if (!(start < end)) {
        throw Error("analysis window '" + label + "' must satisfy start < end (" + format_utc(start) +
                    " >= " + format_utc(end) + ")");
    }
    return AnalysisWindow{start, end, std::move(label)};
}

struct RepoHandle::State {
    std::unique_ptr<git::ObjectStore> store;
    mutable std::mutex mutex;
    mutable std::unordered_map<ObjectId, CommitRecord> commits;
    mutable std::unordered_map<ObjectId, std::vector<TreeFile>> trees;
};

const git::ObjectStore& RepoHandle::store() const noexcept { return *state_->store; }

namespace {

std::optional<fs::path> find_git_dir(const fs::path& path) {
    std::error_code ec;
    auto dot_git = path / ".git";
    if (fs::is_directory(dot_git, ec)) return dot_git;
    if (fs::is_regular_file(dot_git, ec)) {
        std::ifstream in(dot_git);
        std::string line;
        std::getline(in, line);
        if (line.rfind("gitdir: ", 0) == 0) {
            fs::path target = line.substr(8);
            if (target.is_relative()) target = path / target;
            return target;
        }
        return std::nullopt;
    }
    if (fs::is_directory(path / "objects", ec) && fs::is_regular_file(path / "HEAD", ec)) return path;
    return std::nullopt;
}

std::string short_branch(const std::string& ref) {
    for (std::string_view prefix : {"refs/heads/", "refs/remotes/origin/"}) {
        if (ref.rfind(prefix, 0) == 0) return ref.substr(prefix.size());
    }
    return ref;
}

void walk_tree(const git::ObjectStore& store, const ObjectId& tree_id, const std::string& prefix,
               std::vector<TreeFile>& out) {
    auto raw = store.read(tree_id);
    if (!raw || raw->type != git::ObjectType::tree) throw CorruptObject("missing tree " + tree_id);
    for (auto& entry : git::parse_tree(raw->data)) {
        auto path = prefix.empty() ? entry.name : prefix + "/" + entry.name;
        if (entry.is_tree()) {
            walk_tree(store, entry.id, path, out);
        } else if (!entry.is_submodule()) {
            out.push_back(TreeFile{std::move(path), entry.id, entry.mode});
        }
    }
}

}  // namespace

RepoHandle open_repo(const fs::path& path, const std::optional<std::string>& branch) {
    std::error_code ec;
    if (!fs::is_directory(path, ec)) throw NotARepository("not a directory: " + path.string());
    auto git_dir = find_git_dir(path);
    if (!git_dir || !fs::is_directory(*git_dir / "objects", ec) || !fs::exists(*git_dir / "HEAD", ec)) {
        throw NotARepository("no git repository at " + path.string());
    }
    RepoHandle handle;
    handle.root_path_ = path;
    handle.state_ = std::make_shared<RepoHandle::State>();
    handle.state_->store = std::make_unique<git::ObjectStore>(*git_dir);

    std::optional<ObjectId> tip;
    std::string name;
    if (branch) {
        name = *branch;
        tip = handle.branch_tip(name);
        if (!tip) throw BranchNotFound(name);
    } else {
        std::vector<std::string> candidates;
        const auto& store = *handle.state_->store;
        if (auto origin_head = store.symbolic_target("refs/remotes/origin/HEAD")) {
            candidates.push_back(short_branch(*origin_head));
        }
        if (auto head = store.symbolic_target("HEAD")) candidates.push_back(short_branch(*head));
        candidates.emplace_back("main");
        candidates.emplace_back("master");
        for (const auto& candidate : candidates) {
            if ((tip = handle.branch_tip(candidate))) {
                name = candidate;
                break;
            }
        }
        if (!tip) {
            // Detached HEAD with no branch at all.
            if (auto head = store.resolve_ref("HEAD")) {
                tip = head;
                name = "HEAD";
            } else {
                throw BranchNotFound(candidates.front());
            }
        }
    }
    handle.default_branch_ = name;
    handle.head_ref_ = *tip;
    handle.commit(*tip);  // validates the head object
    return handle;
}

std::optional<ObjectId> RepoHandle::branch_tip(const std::string& name) const {
    const auto& s = store();
    if (name == "HEAD") return s.resolve_ref("HEAD");
    for (const auto& ref : {"refs/heads/" + name, "refs/remotes/origin/" + name}) {
        if (auto id = s.resolve_ref(ref)) return id;
    }
    return std::nullopt;
}

git::CommitObject RepoHandle::commit_object(const ObjectId& hash) const {
    std::optional<git::RawObject> raw;
    try {
        raw = store().read(hash);
    } catch (const CorruptObject&) {
        throw;
    }
    if (!raw || raw->type != git::ObjectType::commit) throw UnknownCommit(hash);
    return git::parse_commit(raw->data);
}

CommitRecord RepoHandle::commit(const ObjectId& hash) const {
    {
        std::lock_guard lock(state_->mutex);
        if (auto it = state_->commits.find(hash); it != state_->commits.end()) return it->second;
    }
    auto obj = commit_object(hash);
    CommitRecord rec;
    rec.hash = hash;
    rec.author_name = obj.author.name;
    rec.author_email = obj.author.email;
    rec.authored_at = obj.author.when;
    rec.message = obj.message;
    rec.parents = obj.parents;
    rec.is_merge = obj.parents.size() >= 2;
    std::vector<TreeFile> parent_tree;
    if (!obj.parents.empty()) parent_tree = tree_files(obj.parents.front());
    rec.changed_files = diff_trees(*this, parent_tree, tree_files(hash));
    std::lock_guard lock(state_->mutex);
    return state_->commits.emplace(hash, std::move(rec)).first->second;
}

std::vector<TreeFile> RepoHandle::tree_files(const ObjectId& commit_id) const {
    {
        std::lock_guard lock(state_->mutex);
        if (auto it = state_->trees.find(commit_id); it != state_->trees.end()) return it->second;
    }
    auto obj = commit_object(commit_id);
    std::vector<TreeFile> files;
    walk_tree(store(), obj.tree, "", files);
    std::sort(files.begin(), files.end(), [](const TreeFile& a, const TreeFile& b) { return a.path < b.path; });
    std::lock_guard lock(state_->mutex);
    return state_->trees.emplace(commit_id, std::move(files)).first->second;
}

std::string RepoHandle::blob(const ObjectId& id) const {
    auto raw = store().read(id);
    if (!raw || raw->type != git::ObjectType::blob) throw CorruptObject("missing blob " + id);
    return std::move(raw->data);
}

std::vector<ObjectId> RepoHandle::reachable(const ObjectId& tip) const {
    std::vector<ObjectId> order;
    std::unordered_set<ObjectId> seen{tip};
    std::vector<ObjectId> stack{tip};
    while (!stack.empty()) {
        auto id = std::move(stack.back());
        stack.pop_back();
        auto obj = commit_object(id);
        order.push_back(id);
        for (const auto& parent : obj.parents) {
            if (seen.insert(parent).second) stack.push_back(parent);
        }
    }
    return order;
}

std::vector<CommitRecord> list_commits(const RepoHandle& repo, const AnalysisWindow& window) {
    std::vector<CommitRecord> out;
    for (const auto& id : repo.reachable(repo.head_ref())) {
        auto obj = repo.commit_object(id);
        if (obj.parents.size() >= 2 || !window.contains(obj.author.when)) continue;
        out.push_back(repo.commit(id));
    }
    std::sort(out.begin(), out.end(), [](const CommitRecord& a, const CommitRecord& b) {
        return std::tie(a.authored_at, a.hash) < std::tie(b.authored_at, b.hash);
    });
    return out;
}

std::vector<SnapshotFile> snapshot(const RepoHandle& repo, const ObjectId& at) {
    std::vector<SnapshotFile> out;
    for (const auto& file : repo.tree_files(at)) out.push_back(SnapshotFile{file.path, repo.blob(file.blob)});
    return out;
}

std::optional<ObjectId> window_end_commit(const RepoHandle& repo, const AnalysisWindow& window) {
    std::optional<ObjectId> current = repo.head_ref();
    while (current) {
        auto obj = repo.commit_object(*current);
        if (obj.author.when < window.end) return current;
        current = obj.parents.empty() ? std::nullopt : std::optional<ObjectId>(obj.parents.front());
    }
    return std::nullopt;
}

std::vector<FileChange> diff_trees(const RepoHandle& repo, const std::vector<TreeFile>& old_tree,
                                   const std::vector<TreeFile>& new_tree) {
    std::map<std::string, const TreeFile*> old_by_path;
    std::map<std::string, const TreeFile*> new_by_path;
    for (const auto& f : old_tree) old_by_path[f.path] = &f;
    for (const auto& f : new_tree) new_by_path[f.path] = &f;

    std::vector<FileChange> changes;
    std::vector<const TreeFile*> removed;
    std::vector<const TreeFile*> added;
    for (const auto& [path, file] : new_by_path) {
        auto it = old_by_path.find(path);
        if (it == old_by_path.end()) {
            added.push_back(file);
        } else if (it->second->blob != file->blob) {
            changes.push_back(FileChange{FileChange::Kind::modify, path, {}});
        }
    }
    for (const auto& [path, file] : old_by_path) {
        if (!new_by_path.count(path)) removed.push_back(file);
    }

    // Exact renames first, then similarity-ranked pairs.
    std::set<const TreeFile*> paired_old;
    std::set<const TreeFile*> paired_new;
    for (const auto* a : added) {
        for (const auto* r : removed) {
            if (!paired_old.count(r) && r->blob == a->blob) {
                changes.push_back(FileChange{FileChange::Kind::rename, a->path, r->path});
                paired_old.insert(r);
                paired_new.insert(a);
                break;
            }
        }
    }
    struct Candidate {
        double score;
        const TreeFile* old_file;
        const TreeFile* new_file;
    };
    std::vector<Candidate> candidates;
    constexpr std::size_t kMaxRenameBytes = 1 << 20;
    std::map<const TreeFile*, std::string> contents;
    auto content_of = [&](const TreeFile* f) -> const std::string& {
        auto it = contents.find(f);
        if (it == contents.end()) it = contents.emplace(f, repo.blob(f->blob)).first;
        return it->second;
    };
    for (const auto* a : added) {
        if (paired_new.count(a)) continue;
        const auto& new_content = content_of(a);
        if (new_content.size() > kMaxRenameBytes || diff::looks_binary(new_content)) continue;
        for (const auto* r : removed) {
            if (paired_old.count(r)) continue;
            const auto& old_content = content_of(r);
            if (old_content.size() > kMaxRenameBytes || diff::looks_binary(old_content)) continue;
            if (old_content.empty() || new_content.empty()) continue;
            double score = diff::similarity(old_content, new_content);
            if (score >= kRenameSimilarity) candidates.push_back({score, r, a});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.score != y.score) return x.score > y.score;
        return std::tie(x.old_file->path, x.new_file->path) < std::tie(y.old_file->path, y.new_file->path);
    });
    for (const auto& c : candidates) {
        if (paired_old.count(c.old_file) || paired_new.count(c.new_file)) continue;
        changes.push_back(FileChange{FileChange::Kind::rename, c.new_file->path, c.old_file->path});
        paired_old.insert(c.old_file);
        paired_new.insert(c.new_file);
    }
    for (const auto* a : added) {
        if (!paired_new.count(a)) changes.push_back(FileChange{FileChange::Kind::add, a->path, {}});
    }
    for (const auto* r : removed) {
        if (!paired_old.count(r)) changes.push_back(FileChange{FileChange::Kind::remove, r->path, {}});
    }
    std::sort(changes.begin(), changes.end(), [](const FileChange& a, const FileChange& b) {
        return std::tie(a.path, a.old_path) < std::tie(b.path, b.old_path);
    });
    return changes;
}

}  // namespace contribsum
