#include <contribsum/attribution.hpp>
#include <contribsum/error.hpp>
#include <contribsum/linediff.hpp>
#include <contribsum/metrics.hpp>

#include <fnmatch.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace contribsum {

using nlohmann::json;

std::vector<std::string> default_excludes() {
    return {
        "package-lock.json", "yarn.lock", "pnpm-lock.yaml", "poetry.lock", "Pipfile.lock", "Cargo.lock",
        "composer.lock", "Gemfile.lock", "*.lock", "*.min.js", "*.min.css", "*.map", "*.pyc",
        "node_modules/*", "*/node_modules/*", "vendor/*", "*/vendor/*", "venv/*", ".venv/*", "*/site-packages/*",
        "dist/*", "build/*", "*/dist/*", "*/build/*", "__pycache__/*", "*/__pycache__/*", ".ipynb_checkpoints/*",
        "*/.ipynb_checkpoints/*",
    };
}

AttributionOptions AttributionOptions::defaults() {
    AttributionOptions o;
    o.excludes = default_excludes();
    return o;
}

bool is_excluded(std::string_view path, const std::vector<std::string>& globs) {
    const std::string full(path);
    const auto slash = full.rfind('/');
    const std::string base = slash == std::string::npos ? full : full.substr(slash + 1);
    for (const auto& g : globs) {
        if (fnmatch(g.c_str(), full.c_str(), 0) == 0) return true;
        if (g.find('/') == std::string::npos && fnmatch(g.c_str(), base.c_str(), 0) == 0) return true;
    }
    return false;
}

const std::vector<ContributionEvidence>* ContributionSet::evidence_for(std::string_view student_id) const {
    if (student_id == kUnmappedId) return &unmapped;
    auto it = per_student.find(std::string(student_id));
    return it == per_student.end() ? nullptr : &it->second;
}

const ContributionEvidence* ContributionSet::evidence_for(std::string_view student_id, std::string_view path) const {
    const auto* list = evidence_for(student_id);
    if (!list) return nullptr;
    for (const auto& e : *list) {
        if (e.path == path) return &e;
    }
    return nullptr;
}

namespace {

// ---------------------------------------------------------------------------
// Blame engine

struct Origin {
    ObjectId commit;
};

class Blamer {
public:
    explicit Blamer(const RepoHandle& repo) : repo_(repo) {}

    /// Commits reachable from `tip` in an order where every commit precedes
    /// its parents.
    void prepare(const ObjectId& tip) {
        order_index_.clear();
        auto all = repo_.reachable(tip);
        std::unordered_map<ObjectId, int> child_count;
        for (const auto& id : all) {
            for (const auto& p : parents(id)) ++child_count[p];
        }
        std::vector<ObjectId> ready{tip};
        std::size_t next = 0;
        while (!ready.empty()) {
            auto id = ready.back();
            ready.pop_back();
            order_index_[id] = next++;
            const auto& ps = parents(id);
            // Push in reverse so the first parent is visited first.
            for (auto it = ps.rbegin(); it != ps.rend(); ++it) {
                if (--child_count[*it] == 0) ready.push_back(*it);
            }
        }
    }

    /// Origin commit for each line of `path` at `tip` (prepare(tip) first).
    std::vector<ObjectId> blame_file(const ObjectId& tip, const std::string& path) {
        const auto* file = find_file(tip, path);
        if (!file) return {};
        const auto& lines = lines_of(file->blob);
        std::vector<ObjectId> result(lines.size());

        using Key = std::pair<std::size_t, std::string>;
        std::map<Key, std::vector<std::pair<std::size_t, std::size_t>>> pending;  // (final, local)
        std::vector<std::pair<std::size_t, std::size_t>> initial;
        for (std::size_t i = 0; i < lines.size(); ++i) initial.emplace_back(i, i);
        if (!initial.empty()) pending[{order_index_.at(tip), path}] = std::move(initial);

        while (!pending.empty()) {
            auto node = pending.extract(pending.begin());
            const auto commit_id = id_at(node.key().first);
            const auto& cur_path = node.key().second;
            auto remaining = std::move(node.mapped());
            const auto* cur_file = find_file(commit_id, cur_path);
            const auto& ps = parents(commit_id);
            for (const auto& parent : ps) {
                if (remaining.empty()) break;
                auto source = source_in_parent(commit_id, *cur_file, parent);
                if (!source) continue;
                auto& dest = pending[{order_index_.at(parent), source->path}];
                if (source->blob == cur_file->blob) {
                    dest.insert(dest.end(), remaining.begin(), remaining.end());
                    remaining.clear();
                    break;
                }
                const auto& old_lines = lines_of(source->blob);
                const auto& new_lines = lines_of(cur_file->blob);
                std::unordered_map<std::size_t, std::size_t> new_to_old;
                for (auto [o, n] : diff::match_lines(old_lines, new_lines)) new_to_old.emplace(n, o);
                std::vector<std::pair<std::size_t, std::size_t>> kept;
                for (auto [final_idx, local] : remaining) {
                    if (auto it = new_to_old.find(local); it != new_to_old.end()) {
                        dest.emplace_back(final_idx, it->second);
                    } else {
                        kept.emplace_back(final_idx, local);
                    }
                }
                if (dest.empty()) pending.erase({order_index_.at(parent), source->path});
                remaining = std::move(kept);
            }
            for (auto [final_idx, local] : remaining) result[final_idx] = commit_id;
        }
        return result;
    }

    const std::vector<std::string_view>& lines_of(const ObjectId& blob) {
        auto it = lines_.find(blob);
        if (it != lines_.end()) return it->second;
        auto& content = blobs_.emplace(blob, repo_.blob(blob)).first->second;
        return lines_.emplace(blob, diff::split_lines(content)).first->second;
    }

    const std::string& content_of(const ObjectId& blob) {
        lines_of(blob);
        return blobs_.at(blob);
    }

    const git::CommitObject& commit(const ObjectId& id) {
        auto it = commits_.find(id);
        if (it == commits_.end()) it = commits_.emplace(id, repo_.commit_object(id)).first;
        return it->second;
    }

private:
    const std::vector<ObjectId>& parents(const ObjectId& id) { return commit(id).parents; }

    const ObjectId& id_at(std::size_t index) {
        if (ids_by_index_.size() != order_index_.size()) {
            ids_by_index_.assign(order_index_.size(), {});
            for (const auto& [id, idx] : order_index_) ids_by_index_[idx] = id;
        }
        return ids_by_index_[index];
    }

    const std::map<std::string, TreeFile>& tree(const ObjectId& commit_id) {
        auto it = trees_.find(commit_id);
        if (it != trees_.end()) return it->second;
        std::map<std::string, TreeFile> by_path;
        for (auto& f : repo_.tree_files(commit_id)) by_path.emplace(f.path, f);
        return trees_.emplace(commit_id, std::move(by_path)).first->second;
    }

    const TreeFile* find_file(const ObjectId& commit_id, const std::string& path) {
        const auto& t = tree(commit_id);
        auto it = t.find(path);
        return it == t.end() ? nullptr : &it->second;
    }

    /// Same path in the parent, else the best rename candidate among the
    /// parent's files that no longer exist in the child.
    std::optional<TreeFile> source_in_parent(const ObjectId& child, const TreeFile& file, const ObjectId& parent) {
        if (const auto* same = find_file(parent, file.path)) return *same;
        const auto& child_tree = tree(child);
        const auto& parent_tree = tree(parent);
        const TreeFile* best = nullptr;
        double best_score = -1.0;
        const auto& new_content = content_of(file.blob);
        if (new_content.size() > (std::size_t(1) << 20) || diff::looks_binary(new_content)) return std::nullopt;
        for (const auto& [path, candidate] : parent_tree) {
            if (child_tree.count(path)) continue;
            if (candidate.blob == file.blob) return candidate;
            const auto& old_content = content_of(candidate.blob);
            if (old_content.empty() || new_content.empty() || old_content.size() > (std::size_t(1) << 20) ||
                diff::looks_binary(old_content)) {
                continue;
            }
            double score = diff::similarity(old_content, new_content);
            if (score >= kRenameSimilarity && score > best_score) {
                best_score = score;
                best = &candidate;
            }
        }
        if (!best) return std::nullopt;
        return *best;
    }

    const RepoHandle& repo_;
    std::unordered_map<ObjectId, std::size_t> order_index_;
    std::vector<ObjectId> ids_by_index_;
    std::unordered_map<ObjectId, git::CommitObject> commits_;
    std::unordered_map<ObjectId, std::map<std::string, TreeFile>> trees_;
    std::unordered_map<ObjectId, std::string> blobs_;
    std::unordered_map<ObjectId, std::vector<std::string_view>> lines_;
};

bool is_notebook(std::string_view path) {
    return path.size() >= 6 && path.substr(path.size() - 6) == ".ipynb";
}

bool is_python(std::string_view path) { return path.size() >= 3 && path.substr(path.size() - 3) == ".py"; }

std::string signature_text(const std::string& name, const std::string& email) {
    return name + " <" + email + ">";
}

}  // namespace

std::vector<LineAttribution> blame_snapshot(const RepoHandle& repo, const ObjectId& at, const Roster& roster,
                                            const std::vector<std::string>& excludes, std::size_t max_file_bytes) {
    auto files = repo.tree_files(at);  // throws UnknownCommit
    Blamer blamer(repo);
    blamer.prepare(at);
    std::vector<LineAttribution> out;
    for (const auto& file : files) {
        if (file.mode == "120000" || is_excluded(file.path, excludes)) continue;
        const auto& content = blamer.content_of(file.blob);
        if (content.size() > max_file_bytes || diff::looks_binary(content)) continue;
        const auto& lines = blamer.lines_of(file.blob);
        auto origins = blamer.blame_file(at, file.path);
        std::vector<bool> dropped(lines.size(), false);
        if (is_notebook(file.path)) {
            for (auto n : notebook_output_lines(content)) {
                if (n >= 1 && n <= dropped.size()) dropped[n - 1] = true;
            }
        }
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (dropped[i]) continue;
            const auto& c = blamer.commit(origins[i]);
            LineAttribution a;
            a.path = file.path;
            a.line_no = i + 1;
            a.content = std::string(lines[i]);
            a.student = resolve(roster, c.author.name, c.author.email);
            a.commit = origins[i];
            a.authored_at = c.author.when;
            a.author_name = c.author.name;
            a.author_email = c.author.email;
            out.push_back(std::move(a));
        }
    }
    return out;
}

namespace {

std::vector<CommitRecord> window_commits(const RepoHandle& repo, const ObjectId& tip, const AnalysisWindow& window) {
    std::vector<CommitRecord> out;
    for (const auto& id : repo.reachable(tip)) {
        auto obj = repo.commit_object(id);
        if (obj.parents.size() >= 2 || !window.contains(obj.author.when)) continue;
        out.push_back(repo.commit(id));
    }
    std::sort(out.begin(), out.end(), [](const CommitRecord& a, const CommitRecord& b) {
        return std::tie(a.authored_at, a.hash) < std::tie(b.authored_at, b.hash);
    });
    return out;
}

}  // namespace

ContributionSet build_contribution_set(const RepoHandle& repo, const AnalysisWindow& window, const Roster& roster,
                                       const AttributionOptions& options) {
    ContributionSet set;
    set.window = window;
    set.snapshot_commit = window_end_commit(repo, window);

    std::set<std::string> unmapped_authors;
    auto student_key = [&](const std::string& name, const std::string& email) -> std::string {
        if (auto s = resolve(roster, name, email)) return s->id;
        unmapped_authors.insert(signature_text(name, email));
        return std::string(kUnmappedId);
    };

    // Participants of every window commit, author first.
    std::unordered_map<ObjectId, std::vector<std::string>> participants;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> touched;  // (student, path) -> messages
    std::vector<CommitRecord> commits;
    std::set<std::string> snapshot_paths;
    if (set.snapshot_commit) {
        commits = window_commits(repo, *set.snapshot_commit, window);
        for (const auto& f : repo.tree_files(*set.snapshot_commit)) snapshot_paths.insert(f.path);
    }
    std::set<std::string> active;
    for (const auto& c : commits) {
        std::vector<std::string> who{student_key(c.author_name, c.author_email)};
        if (options.coauthor_split) {
            for (const auto& tag : parse_coauthors(c.message, c.hash)) {
                auto key = student_key(tag.name, tag.email);
                if (std::find(who.begin(), who.end(), key) == who.end()) who.push_back(key);
            }
        }
        for (const auto& w : who) {
            active.insert(w);
            for (const auto& change : c.changed_files) {
                if (!snapshot_paths.count(change.path) || is_excluded(change.path, options.excludes)) continue;
                touched[{w, change.path}].push_back(c.message);
            }
        }
        participants.emplace(c.hash, std::move(who));
    }

    struct Tally {
        std::size_t owned = 0;
        std::size_t code = 0;
        std::size_t in_window = 0;
    };
    std::map<std::pair<std::string, std::string>, Tally> tallies;
    std::map<std::pair<std::string, std::string>, std::vector<SoloFunction>> solos;
    if (set.snapshot_commit) {
        auto attributions = blame_snapshot(repo, *set.snapshot_commit, roster, options.excludes, options.max_file_bytes);
        std::map<std::string, ObjectId> blob_of;
        for (const auto& f : repo.tree_files(*set.snapshot_commit)) blob_of.emplace(f.path, f.blob);
        std::map<std::string, std::vector<const LineAttribution*>> by_file;
        for (const auto& a : attributions) by_file[a.path].push_back(&a);

        for (const auto& [path, lines] : by_file) {
            std::string content;
            for (const auto* a : lines) content += a->content + "\n";
            auto& own = set.ownership[path];
            own.line_count = lines.size();
            // Comment classification needs the real file, not the filtered lines.
            const auto comment_flags = comment_or_blank_lines(path, repo.blob(blob_of.at(path)));
            std::map<ObjectId, std::size_t> round_robin;
            std::vector<std::string> raw_owner(lines.size());
            for (std::size_t i = 0; i < lines.size(); ++i) {
                const auto& a = *lines[i];
                std::string owner = a.student ? a.student->id : std::string(kUnmappedId);
                if (!a.student) unmapped_authors.insert(signature_text(a.author_name, a.author_email));
                raw_owner[i] = owner;
                const bool in_window = window.contains(a.authored_at);
                if (in_window && options.coauthor_split) {
                    if (auto it = participants.find(a.commit); it != participants.end() && it->second.size() > 1) {
                        auto& counter = round_robin[a.commit];
                        owner = it->second[counter % it->second.size()];
                        ++counter;
                    }
                }
                ++own.owners[owner];
                auto& t = tallies[{owner, path}];
                ++t.owned;
                const bool comment = a.line_no - 1 < comment_flags.size() && comment_flags[a.line_no - 1];
                if (!comment) ++t.code;
                if (in_window) ++t.in_window;
            }
            if (is_python(path)) {
                // Solo ownership over the lines each function owns directly.
                std::map<std::size_t, std::size_t> index_of_line;
                for (std::size_t i = 0; i < lines.size(); ++i) index_of_line[lines[i]->line_no] = i;
                const auto report = cyclomatic(content);
                for (const auto& fn : report.functions) {
                    std::set<std::string> owners;
                    for (auto ln = fn.span.first; ln <= fn.span.last; ++ln) {
                        bool nested = false;
                        for (const auto& other : report.functions) {
                            if (&other != &fn && fn.span.contains(other.span) && !(other.span == fn.span) &&
                                other.span.contains(ln)) {
                                nested = true;
                                break;
                            }
                        }
                        if (nested) continue;
                        auto it = index_of_line.find(ln);
                        if (it != index_of_line.end()) owners.insert(raw_owner[it->second]);
                    }
                    if (owners.size() == 1 && *owners.begin() != kUnmappedId) {
                        solos[{*owners.begin(), path}].push_back(SoloFunction{fn.name, fn.score});
                    }
                }
            }
        }
    }

    auto make_evidence = [&](const StudentId& student, const std::string& path) {
        ContributionEvidence e;
        e.student = student;
        e.path = path;
        const std::pair<std::string, std::string> key{student.id, path};
        if (auto it = tallies.find(key); it != tallies.end()) {
            e.lines_owned = it->second.owned;
            e.code_lines_owned = it->second.code;
            e.lines_added_in_window = it->second.in_window;
        }
        if (auto it = touched.find(key); it != touched.end()) e.commit_messages = it->second;
        if (auto it = solos.find(key); it != solos.end()) e.solo_functions = it->second;
        return e;
    };

    std::map<std::string, std::set<std::string>> files_by_student;
    for (const auto& [key, messages] : touched) files_by_student[key.first].insert(key.second);
    for (const auto& [key, tally] : tallies) {
        if (tally.in_window > 0) files_by_student[key.first].insert(key.second);
    }

    for (const auto& student : roster.students) {
        if (!active.count(student.id)) {
            set.zero_commit_students.push_back(student);
            continue;
        }
        auto& list = set.per_student[student.id];
        for (const auto& path : files_by_student[student.id]) list.push_back(make_evidence(student, path));
    }
    for (const auto& path : files_by_student[std::string(kUnmappedId)]) {
        set.unmapped.push_back(make_evidence(unmapped_student(), path));
    }
    set.unmapped_authors.assign(unmapped_authors.begin(), unmapped_authors.end());

    for (const auto& branch : options.include_branches) {
        set.supplements.push_back(branch_supplement(repo, branch, roster, options));
    }
    return set;
}

std::map<std::string, Churn> churn_stats(const RepoHandle& repo, const AnalysisWindow& window, const Roster& roster) {
    std::map<std::string, Churn> out;
    const auto excludes = default_excludes();
    for (const auto& c : list_commits(repo, window)) {
        auto who = resolve(roster, c.author_name, c.author_email);
        auto& churn = out[who ? who->id : std::string(kUnmappedId)];
        std::map<std::string, TreeFile> before;
        std::map<std::string, TreeFile> after;
        if (!c.parents.empty()) {
            for (auto& f : repo.tree_files(c.parents.front())) before.emplace(f.path, f);
        }
        for (auto& f : repo.tree_files(c.hash)) after.emplace(f.path, f);
        for (const auto& change : c.changed_files) {
            if (is_excluded(change.path, excludes)) continue;
            std::string old_content;
            std::string new_content;
            switch (change.kind) {
                case FileChange::Kind::add: new_content = repo.blob(after.at(change.path).blob); break;
                case FileChange::Kind::remove: old_content = repo.blob(before.at(change.path).blob); break;
                case FileChange::Kind::modify:
                    old_content = repo.blob(before.at(change.path).blob);
                    new_content = repo.blob(after.at(change.path).blob);
                    break;
                case FileChange::Kind::rename:
                    old_content = repo.blob(before.at(change.old_path).blob);
                    new_content = repo.blob(after.at(change.path).blob);
                    break;
            }
            if (diff::looks_binary(old_content) || diff::looks_binary(new_content)) continue;
            auto stats = diff::line_stats(old_content, new_content);
            churn.lines_added += stats.added;
            churn.lines_deleted += stats.deleted;
        }
    }
    for (const auto& s : roster.students) out.try_emplace(s.id);
    return out;
}

BranchSupplement branch_supplement(const RepoHandle& repo, const std::string& branch, const Roster& roster,
                                   const AttributionOptions& options) {
    auto tip = repo.branch_tip(branch);
    if (!tip) throw BranchNotFound(branch);
    BranchSupplement sup;
    sup.branch = branch;
    sup.tip = *tip;
    auto on_default = repo.reachable(repo.head_ref());
    std::unordered_set<ObjectId> merged(on_default.begin(), on_default.end());
    for (const auto& a : blame_snapshot(repo, *tip, roster, options.excludes, options.max_file_bytes)) {
        if (merged.count(a.commit)) continue;
        ++sup.unmerged_lines[a.student ? a.student->id : std::string(kUnmappedId)][a.path];
    }
    return sup;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json evidence_json(const ContributionEvidence& e) {
    json solo = json::array();
    for (const auto& s : e.solo_functions) solo.push_back({{"name", s.name}, {"complexity", s.complexity}});
    return {{"student", e.student.id},
            {"display_name", e.student.display_name},
            {"path", e.path},
            {"lines_owned", e.lines_owned},
            {"code_lines_owned", e.code_lines_owned},
            {"lines_added_in_window", e.lines_added_in_window},
            {"commit_messages", e.commit_messages},
            {"solo_functions", solo}};
}

ContributionEvidence evidence_from(const json& j) {
    ContributionEvidence e;
    e.student = StudentId{j.at("student").get<std::string>(), j.at("display_name").get<std::string>()};
    e.path = j.at("path").get<std::string>();
    e.lines_owned = j.at("lines_owned").get<std::size_t>();
    e.code_lines_owned = j.at("code_lines_owned").get<std::size_t>();
    e.lines_added_in_window = j.at("lines_added_in_window").get<std::size_t>();
    e.commit_messages = j.at("commit_messages").get<std::vector<std::string>>();
    for (const auto& s : j.at("solo_functions")) {
        e.solo_functions.push_back(SoloFunction{s.at("name").get<std::string>(), s.at("complexity").get<int>()});
    }
    return e;
}

}  // namespace

json to_json(const ContributionSet& set) {
    json per_student = json::object();
    for (const auto& [id, list] : set.per_student) {
        json arr = json::array();
        for (const auto& e : list) arr.push_back(evidence_json(e));
        per_student[id] = arr;
    }
    json zero = json::array();
    for (const auto& s : set.zero_commit_students) zero.push_back({{"id", s.id}, {"display_name", s.display_name}});
    json unmapped = json::array();
    for (const auto& e : set.unmapped) unmapped.push_back(evidence_json(e));
    json ownership = json::object();
    for (const auto& [path, own] : set.ownership) {
        ownership[path] = {{"line_count", own.line_count}, {"owners", own.owners}};
    }
    json supplements = json::array();
    for (const auto& s : set.supplements) {
        supplements.push_back({{"branch", s.branch}, {"tip", s.tip}, {"unmerged_lines", s.unmerged_lines}});
    }
    return {{"window",
             {{"start", format_utc(set.window.start)}, {"end", format_utc(set.window.end)}, {"label", set.window.label}}},
            {"snapshot_commit", set.snapshot_commit ? json(*set.snapshot_commit) : json(nullptr)},
            {"per_student", per_student},
            {"zero_commit_students", zero},
            {"unmapped", unmapped},
            {"unmapped_authors", set.unmapped_authors},
            {"ownership", ownership},
            {"supplements", supplements}};
}

ContributionSet contribution_set_from_json(const json& doc) {
    ContributionSet set;
    const auto& w = doc.at("window");
    set.window = AnalysisWindow::make(parse_utc(w.at("start").get<std::string>()),
                                      parse_utc(w.at("end").get<std::string>()), w.at("label").get<std::string>());
    if (!doc.at("snapshot_commit").is_null()) set.snapshot_commit = doc.at("snapshot_commit").get<std::string>();
    for (const auto& [id, arr] : doc.at("per_student").items()) {
        auto& list = set.per_student[id];
        for (const auto& e : arr) list.push_back(evidence_from(e));
    }
    for (const auto& s : doc.at("zero_commit_students")) {
        set.zero_commit_students.push_back(
            StudentId{s.at("id").get<std::string>(), s.at("display_name").get<std::string>()});
    }
    for (const auto& e : doc.at("unmapped")) set.unmapped.push_back(evidence_from(e));
    set.unmapped_authors = doc.at("unmapped_authors").get<std::vector<std::string>>();
    for (const auto& [path, own] : doc.at("ownership").items()) {
        FileOwnership o;
        o.line_count = own.at("line_count").get<std::size_t>();
        o.owners = own.at("owners").get<std::map<std::string, std::size_t>>();
        set.ownership[path] = o;
    }
    for (const auto& s : doc.at("supplements")) {
        BranchSupplement b;
        b.branch = s.at("branch").get<std::string>();
        b.tip = s.at("tip").get<std::string>();
        b.unmerged_lines = s.at("unmerged_lines").get<std::map<std::string, std::map<std::string, std::size_t>>>();
        set.supplements.push_back(std::move(b));
    }
    return set;
}

std::string serialize(const ContributionSet& set) { return to_json(set).dump(2) + "\n"; }

}  // namespace contribsum
