#include <contribsum/digest.hpp>
#include <contribsum/embedded.hpp>
#include <contribsum/error.hpp>
#include <contribsum/gitstore.hpp>
#include <contribsum/synthfix.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

namespace contribsum::synthfix {

namespace {

std::string_view ltrim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::pair<std::string_view, std::string_view> split_word(std::string_view s) {
    s = ltrim(s);
    auto sp = s.find_first_of(" \t");
    if (sp == std::string_view::npos) return {s, {}};
    return {s.substr(0, sp), ltrim(s.substr(sp + 1))};
}

std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        auto [w, rest] = split_word(s);
        if (w.empty()) break;
        out.push_back(w);
        s = rest;
    }
    return out;
}

std::size_t to_count(std::string_view word, const std::string& where) {
    try {
        std::size_t used = 0;
        auto value = std::stoull(std::string(word), &used);
        if (used != word.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        throw ScriptError(where, "expected a non-negative number, got '" + std::string(word) + "'");
    }
}

Signature parse_signature(std::string_view text, const std::string& where) {
    text = rtrim(ltrim(text));
    auto lt = text.rfind('<');
    if (lt == std::string_view::npos || text.back() != '>') {
        throw ScriptError(where, "expected 'Name <email>', got '" + std::string(text) + "'");
    }
    return Signature{std::string(rtrim(text.substr(0, lt))), std::string(text.substr(lt + 1, text.size() - lt - 2))};
}

}  // namespace

RepoScript parse_script(std::string_view text) {
    RepoScript script;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    Step* open = nullptr;
    EditOp* op = nullptr;
    int commit_count = 0;
    auto where = [&] { return fmt::format("line {}", line_no); };

    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        auto stripped = ltrim(line);
        if (!stripped.empty() && stripped.front() == '|') {
            if (!op) throw ScriptError(where(), "content line outside a content-taking operation");
            auto content = stripped.substr(1);
            if (!content.empty() && content.front() == ' ') content.remove_prefix(1);
            op->lines.emplace_back(content);
            continue;
        }
        op = nullptr;
        if (rtrim(stripped).empty() || stripped.front() == '#') continue;
        auto [keyword, rest] = split_word(stripped);
        auto args = words(rest);

        if (open) {
            const auto label = open->label;
            if (keyword == "end") {
                if (open->kind == Step::Kind::commit && open->message.empty()) {
                    throw ScriptError(label, "commit needs a message");
                }
                open = nullptr;
            } else if (keyword == "author") {
                open->author = parse_signature(rest, label);
            } else if (keyword == "coauthor") {
                open->coauthors.push_back(parse_signature(rest, label));
            } else if (keyword == "date") {
                try {
                    open->date = parse_utc(rtrim(rest));
                } catch (const Error& e) {
                    throw ScriptError(label, e.what());
                }
            } else if (keyword == "message") {
                open->message.emplace_back(rtrim(rest));
            } else if (open->kind == Step::Kind::commit) {
                EditOp e{};
                auto need = [&](std::size_t n) {
                    if (args.size() != n) {
                        throw ScriptError(label, fmt::format("'{}' expects {} argument(s) ({})", keyword, n, where()));
                    }
                };
                if (keyword == "write" || keyword == "generate") {
                    need(1);
                    e.kind = keyword == "write" ? EditOp::Kind::write : EditOp::Kind::generate;
                } else if (keyword == "insert") {
                    need(2);
                    e.kind = EditOp::Kind::insert;
                    e.from = to_count(args[1], label);
                } else if (keyword == "replace" || keyword == "delete") {
                    need(3);
                    e.kind = keyword == "replace" ? EditOp::Kind::replace : EditOp::Kind::remove_lines;
                    e.from = to_count(args[1], label);
                    e.to = to_count(args[2], label);
                } else if (keyword == "retouch") {
                    need(2);
                    e.kind = EditOp::Kind::retouch;
                    e.from = to_count(args[1], label);
                } else if (keyword == "rename") {
                    need(2);
                    e.kind = EditOp::Kind::rename;
                    e.new_path = std::string(args[1]);
                } else if (keyword == "remove") {
                    need(1);
                    e.kind = EditOp::Kind::remove_file;
                } else if (keyword == "binary") {
                    need(2);
                    e.kind = EditOp::Kind::binary;
                    e.to = to_count(args[1], label);
                } else {
                    throw ScriptError(label, "unknown operation '" + std::string(keyword) + "' at " + where());
                }
                e.path = std::string(args[0]);
                open->ops.push_back(std::move(e));
                op = &open->ops.back();
            } else {
                throw ScriptError(label, "unexpected '" + std::string(keyword) + "' in merge block");
            }
            continue;
        }

        if (keyword == "fixture") {
            script.name = std::string(rtrim(rest));
        } else if (keyword == "roster") {
            script.roster_text += std::string(rest) + "\n";
        } else if (keyword == "window") {
            if (args.size() != 3) throw ScriptError(where(), "window expects <start> <end> <label>");
            try {
                script.window = AnalysisWindow::make(parse_utc(args[0]), parse_utc(args[1]), std::string(args[2]));
            } catch (const ScriptError&) {
                throw;
            } catch (const Error& e) {
                throw ScriptError(where(), e.what());
            }
        } else if (keyword == "commit") {
            Step s{};
            s.kind = Step::Kind::commit;
            s.label = fmt::format("commit #{} ({})", ++commit_count, where());
            s.branch = "main";
            if (args.size() == 2 && args[0] == "on") {
                s.branch = std::string(args[1]);
            } else if (!args.empty()) {
                throw ScriptError(where(), "expected 'commit' or 'commit on <branch>'");
            }
            script.steps.push_back(std::move(s));
            open = &script.steps.back();
        } else if (keyword == "merge") {
            if (args.size() != 3 || args[1] != "into") throw ScriptError(where(), "expected 'merge <src> into <dst>'");
            Step s{};
            s.kind = Step::Kind::merge;
            s.label = fmt::format("merge #{} ({})", ++commit_count, where());
            s.source = std::string(args[0]);
            s.branch = std::string(args[2]);
            script.steps.push_back(std::move(s));
            open = &script.steps.back();
        } else if (keyword == "branch") {
            if (args.size() != 3 || args[1] != "from") throw ScriptError(where(), "expected 'branch <name> from <src>'");
            Step s{};
            s.kind = Step::Kind::branch;
            s.label = "branch " + std::string(args[0]) + " (" + where() + ")";
            s.branch = std::string(args[0]);
            s.source = std::string(args[2]);
            script.steps.push_back(std::move(s));
        } else if (keyword == "checkpoint") {
            if (args.size() != 1) throw ScriptError(where(), "expected 'checkpoint <label>'");
            Step s{};
            s.kind = Step::Kind::checkpoint;
            s.label = std::string(args[0]);
            script.steps.push_back(std::move(s));
        } else {
            throw ScriptError(where(), "unknown directive '" + std::string(keyword) + "'");
        }
    }
    if (open) throw ScriptError(open->label, "block not closed with 'end'");
    try {
        script.roster = load_roster(script.roster_text);
    } catch (const Error& e) {
        throw ScriptError("roster", e.what());
    }
    for (auto& s : script.steps) {
        if ((s.kind == Step::Kind::merge) && s.message.empty()) {
            s.message.push_back("Merge branch '" + s.source + "' into " + s.branch);
        }
    }
    return script;
}

// ---------------------------------------------------------------------------
// Replay model

namespace {

struct Line {
    std::string content;
    std::string student;
    std::size_t origin;  // node index

    bool operator==(const Line&) const = default;
};

struct File {
    bool binary = false;
    bool generated = false;
    std::string bytes;  // binary payload
    std::vector<Line> lines;

    bool operator==(const File&) const = default;
};

using Tree = std::map<std::string, File>;

struct Node {
    ObjectId id;
    std::vector<std::size_t> parents;
    Tree tree;
    UtcTime date;
    bool merge = false;
    std::string author_student;
    std::vector<std::string> participants;
    TruthChurn churn;
};

class Sink {
public:
    virtual ~Sink() = default;
    virtual ObjectId put(git::ObjectType type, const std::string& data) = 0;
    virtual void set_ref(const std::string&, const ObjectId&) {}
};

class HashSink : public Sink {
public:
    ObjectId put(git::ObjectType type, const std::string& data) override { return git::hash_object(type, data); }
};

class DiskSink : public Sink {
public:
    explicit DiskSink(const std::filesystem::path& dir) : writer_(dir) {}
    ObjectId put(git::ObjectType type, const std::string& data) override { return writer_.write(type, data); }
    void set_ref(const std::string& name, const ObjectId& id) override { writer_.set_ref(name, id); }

private:
    git::ObjectWriter writer_;
};

std::string file_bytes(const File& f) {
    if (f.binary) return f.bytes;
    std::string out;
    for (const auto& l : f.lines) {
        out += l.content;
        out += '\n';
    }
    return out;
}

ObjectId write_tree(Sink& sink, const Tree& tree, const std::string& prefix) {
    std::vector<git::TreeEntry> entries;
    std::set<std::string> subdirs;
    for (auto it = tree.lower_bound(prefix); it != tree.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it) {
        auto rest = it->first.substr(prefix.size());
        auto slash = rest.find('/');
        if (slash == std::string::npos) {
            entries.push_back(git::TreeEntry{"100644", rest, sink.put(git::ObjectType::blob, file_bytes(it->second))});
        } else {
            subdirs.insert(rest.substr(0, slash));
        }
    }
    for (const auto& dir : subdirs) {
        entries.push_back(git::TreeEntry{"40000", dir, write_tree(sink, tree, prefix + dir + "/")});
    }
    return sink.put(git::ObjectType::tree, git::serialize_tree(std::move(entries)));
}

bool same_modulo_trailing_ws(std::string_view a, std::string_view b) { return rtrim(a) == rtrim(b); }

class Replayer {
public:
    Replayer(const RepoScript& script, Sink& sink) : script_(script), sink_(sink) {}

    GroundTruth run() {
        GroundTruth truth;
        truth.window = script_.window.value_or(
            AnalysisWindow{from_unix(0), from_unix(std::int64_t(4102444800)), std::string("all")});
        for (const auto& step : script_.steps) {
            switch (step.kind) {
                case Step::Kind::commit: commit(step); break;
                case Step::Kind::merge: merge(step); break;
                case Step::Kind::branch: branch(step); break;
                case Step::Kind::checkpoint: checkpoint(step.label, truth); break;
            }
        }
        if (!branches_.count("main") || !branches_.at("main")) throw ScriptError("final", "main has no commits");
        checkpoint("final", truth);
        truth.main_tip = nodes_[*branches_.at("main")].id;
        for (const auto& [name, tip] : branches_) {
            if (tip) sink_.set_ref("refs/heads/" + name, nodes_[*tip].id);
        }

        const auto main_ancestors = ancestors(*branches_.at("main"));
        std::set<std::string> active;
        for (const auto& s : script_.roster.students) truth.churn[s.id];
        for (auto idx : main_ancestors) {
            const auto& n = nodes_[idx];
            if (n.merge || !truth.window.contains(n.date)) continue;
            auto& c = truth.churn[n.author_student];
            c.added += n.churn.added;
            c.deleted += n.churn.deleted;
            truth.participants[n.id] = n.participants;
            active.insert(n.participants.begin(), n.participants.end());
        }
        for (const auto& s : script_.roster.students) {
            if (!active.count(s.id)) truth.zero_commit_students.push_back(s.id);
        }
        for (const auto& [name, tip] : branches_) {
            if (name == "main" || !tip) continue;
            auto& counts = truth.unmerged_lines[name];
            for (const auto& [path, file] : nodes_[*tip].tree) {
                if (file.binary || file.generated) continue;
                for (const auto& l : file.lines) {
                    if (!main_ancestors.count(l.origin)) ++counts[l.student];
                }
            }
        }
        truth.generated_paths = generated_;
        return truth;
    }

private:
    std::string student_of(const Signature& sig) const {
        auto s = resolve(script_.roster, sig.name, sig.email);
        return s ? s->id : std::string(kUnmappedId);
    }

    Tree tip_tree(const std::string& branch, const std::string& where) const {
        auto it = branches_.find(branch);
        if (it == branches_.end()) {
            if (branch == "main" && nodes_.empty()) return {};
            throw ScriptError(where, "unknown branch '" + branch + "'");
        }
        return it->second ? nodes_[*it->second].tree : Tree{};
    }

    UtcTime next_date(const Step& step) {
        if (step.date.time_since_epoch().count() != 0) {
            last_date_ = step.date;
        } else {
            last_date_ = last_date_.time_since_epoch().count() == 0 ? parse_utc("2024-01-01T00:00:00Z")
                                                                    : last_date_ + std::chrono::minutes(1);
        }
        return last_date_;
    }

    std::string message_of(const Step& step) const {
        std::string msg;
        for (std::size_t i = 0; i < step.message.size(); ++i) {
            if (i) msg += '\n';
            msg += step.message[i];
        }
        msg += '\n';
        if (!step.coauthors.empty()) {
            msg += '\n';
            for (const auto& c : step.coauthors) msg += "Co-authored-by: " + c.name + " <" + c.email + ">\n";
        }
        return msg;
    }

    void apply(const Step& step, const EditOp& op, Tree& tree, Node& node, std::size_t self) {
        const auto& where = step.label;
        auto existing = [&](const std::string& path) -> File& {
            auto it = tree.find(path);
            if (it == tree.end()) throw ScriptError(where, "file '" + path + "' does not exist");
            if (it->second.binary) throw ScriptError(where, "file '" + path + "' is binary");
            return it->second;
        };
        auto fresh = [&](const std::vector<std::string>& lines) {
            std::vector<Line> out;
            for (const auto& l : lines) out.push_back(Line{l, node.author_student, self});
            return out;
        };
        switch (op.kind) {
            case EditOp::Kind::write:
            case EditOp::Kind::generate: {
                File f;
                f.generated = op.kind == EditOp::Kind::generate;
                f.lines = fresh(op.lines);
                // Generated files sit under the default excludes, so they carry no churn.
                if (auto it = tree.find(op.path); it != tree.end() && !it->second.binary && !it->second.generated) {
                    node.churn.deleted += it->second.lines.size();
                }
                if (!f.generated) node.churn.added += op.lines.size();
                if (f.generated) generated_.insert(op.path);
                tree[op.path] = std::move(f);
                break;
            }
            case EditOp::Kind::insert: {
                File* f = nullptr;
                if (op.from == 0 && !tree.count(op.path)) {
                    f = &tree[op.path];
                } else {
                    f = &existing(op.path);
                }
                if (op.from > f->lines.size()) throw ScriptError(where, "insert position past end of " + op.path);
                auto lines = fresh(op.lines);
                f->lines.insert(f->lines.begin() + static_cast<std::ptrdiff_t>(op.from), lines.begin(), lines.end());
                node.churn.added += lines.size();
                break;
            }
            case EditOp::Kind::replace:
            case EditOp::Kind::remove_lines: {
                auto& f = existing(op.path);
                if (op.from < 1 || op.from > op.to || op.to > f.lines.size()) {
                    throw ScriptError(where, fmt::format("line range {}-{} invalid for {} ({} lines)", op.from, op.to,
                                                         op.path, f.lines.size()));
                }
                auto first = f.lines.begin() + static_cast<std::ptrdiff_t>(op.from - 1);
                f.lines.erase(first, f.lines.begin() + static_cast<std::ptrdiff_t>(op.to));
                node.churn.deleted += op.to - op.from + 1;
                if (op.kind == EditOp::Kind::replace) {
                    auto lines = fresh(op.lines);
                    f.lines.insert(f.lines.begin() + static_cast<std::ptrdiff_t>(op.from - 1), lines.begin(),
                                   lines.end());
                    node.churn.added += lines.size();
                }
                break;
            }
            case EditOp::Kind::retouch: {
                auto& f = existing(op.path);
                if (op.lines.size() != 1 || op.from < 1 || op.from > f.lines.size()) {
                    throw ScriptError(where, "retouch needs one content line inside the file");
                }
                auto& line = f.lines[op.from - 1];
                if (!same_modulo_trailing_ws(line.content, op.lines.front())) {
                    throw ScriptError(where, "retouch may only change trailing whitespace");
                }
                line.content = op.lines.front();  // owner and origin unchanged
                break;
            }
            case EditOp::Kind::rename: {
                auto it = tree.find(op.path);
                if (it == tree.end()) throw ScriptError(where, "cannot rename missing file " + op.path);
                if (tree.count(op.new_path)) throw ScriptError(where, "rename target exists: " + op.new_path);
                auto f = std::move(it->second);
                tree.erase(it);
                if (f.generated) generated_.insert(op.new_path);
                tree[op.new_path] = std::move(f);
                break;
            }
            case EditOp::Kind::remove_file: {
                auto it = tree.find(op.path);
                if (it == tree.end()) throw ScriptError(where, "cannot remove missing file " + op.path);
                if (!it->second.binary && !it->second.generated) node.churn.deleted += it->second.lines.size();
                tree.erase(it);
                break;
            }
            case EditOp::Kind::binary: {
                File f;
                f.binary = true;
                f.bytes.resize(op.to);
                for (std::size_t i = 0; i < op.to; ++i) f.bytes[i] = static_cast<char>((i * 7) % 256);
                if (!f.bytes.empty()) f.bytes[0] = '\0';
                tree[op.path] = std::move(f);
                break;
            }
        }
    }

    std::size_t emit(Node node, const Step& step) {
        const std::size_t self = nodes_.size();
        git::CommitObject c;
        c.tree = write_tree(sink_, node.tree, "");
        for (auto p : node.parents) c.parents.push_back(nodes_[p].id);
        c.author = git::Signature{step.author.name, step.author.email, node.date, "+0000"};
        c.committer = c.author;
        c.message = message_of(step);
        node.id = sink_.put(git::ObjectType::commit, git::serialize_commit(c));
        nodes_.push_back(std::move(node));
        return self;
    }

    void commit(const Step& step) {
        if (step.author.email.empty()) throw ScriptError(step.label, "commit needs an author");
        Node node;
        node.tree = tip_tree(step.branch, step.label);
        if (auto it = branches_.find(step.branch); it != branches_.end() && it->second) {
            node.parents.push_back(*it->second);
        }
        node.date = next_date(step);
        node.author_student = student_of(step.author);
        node.participants.push_back(node.author_student);
        for (const auto& co : step.coauthors) {
            auto s = student_of(co);
            if (std::find(node.participants.begin(), node.participants.end(), s) == node.participants.end()) {
                node.participants.push_back(s);
            }
        }
        const std::size_t self = nodes_.size();
        Tree tree = node.tree;
        for (const auto& op : step.ops) apply(step, op, tree, node, self);
        node.tree = std::move(tree);
        branches_[step.branch] = emit(std::move(node), step);
    }

    std::set<std::size_t> ancestors(std::size_t tip) const {
        std::set<std::size_t> seen{tip};
        std::vector<std::size_t> stack{tip};
        while (!stack.empty()) {
            auto n = stack.back();
            stack.pop_back();
            for (auto p : nodes_[n].parents) {
                if (seen.insert(p).second) stack.push_back(p);
            }
        }
        return seen;
    }

    void merge(const Step& step) {
        auto src = branches_.find(step.source);
        auto dst = branches_.find(step.branch);
        if (src == branches_.end() || !src->second) throw ScriptError(step.label, "unknown branch " + step.source);
        if (dst == branches_.end() || !dst->second) throw ScriptError(step.label, "unknown branch " + step.branch);
        const auto ours = *dst->second;
        const auto theirs = *src->second;
        auto a = ancestors(ours);
        auto b = ancestors(theirs);
        std::optional<std::size_t> base;
        for (auto n : a) {
            if (b.count(n) && (!base || n > *base)) base = n;
        }
        const Tree empty;
        const Tree& base_tree = base ? nodes_[*base].tree : empty;
        const Tree& our_tree = nodes_[ours].tree;
        const Tree& their_tree = nodes_[theirs].tree;
        std::set<std::string> paths;
        for (const auto* t : {&base_tree, &our_tree, &their_tree}) {
            for (const auto& [p, f] : *t) paths.insert(p);
        }
        Tree merged;
        auto lookup = [](const Tree& t, const std::string& p) -> const File* {
            auto it = t.find(p);
            return it == t.end() ? nullptr : &it->second;
        };
        auto same = [](const File* x, const File* y) { return (!x && !y) || (x && y && *x == *y); };
        for (const auto& p : paths) {
            const File* o = lookup(our_tree, p);
            const File* t = lookup(their_tree, p);
            const File* bse = lookup(base_tree, p);
            const File* pick = nullptr;
            if (same(o, bse)) pick = t;
            else if (same(t, bse)) pick = o;
            else if (o && t && file_bytes(*o) == file_bytes(*t)) pick = o;
            else throw ScriptError(step.label, "conflicting changes to " + p + " (fixtures merge at file level)");
            if (pick) merged[p] = *pick;
        }
        Node node;
        node.tree = std::move(merged);
        node.parents = {ours, theirs};
        node.date = next_date(step);
        node.merge = true;
        node.author_student = student_of(step.author);
        branches_[step.branch] = emit(std::move(node), step);
    }

    void branch(const Step& step) {
        auto src = branches_.find(step.source);
        if (src == branches_.end()) throw ScriptError(step.label, "unknown source branch " + step.source);
        if (branches_.count(step.branch)) throw ScriptError(step.label, "branch exists: " + step.branch);
        branches_[step.branch] = src->second;
    }

    void checkpoint(const std::string& label, GroundTruth& truth) const {
        auto it = branches_.find("main");
        if (it == branches_.end() || !it->second) throw ScriptError(label, "checkpoint before any commit on main");
        const auto& node = nodes_[*it->second];
        auto& lines = truth.checkpoints[label];
        lines.clear();
        for (const auto& [path, file] : node.tree) {
            if (file.binary || file.generated) continue;
            for (std::size_t i = 0; i < file.lines.size(); ++i) {
                const auto& l = file.lines[i];
                lines.push_back(TruthLine{path, i + 1, l.content, l.student, nodes_[l.origin].id});
            }
        }
        truth.checkpoint_commits[label] = node.id;
    }

    const RepoScript& script_;
    Sink& sink_;
    std::vector<Node> nodes_;
    std::map<std::string, std::optional<std::size_t>> branches_;
    std::set<std::string> generated_;
    UtcTime last_date_{};
};

}  // namespace

GroundTruth compute_truth(const RepoScript& script) {
    HashSink sink;
    return Replayer(script, sink).run();
}

Built build(const RepoScript& script, const std::filesystem::path& destination) {
    std::error_code ec;
    if (std::filesystem::exists(destination, ec) && !std::filesystem::is_empty(destination, ec)) {
        throw ScriptError(script.name.empty() ? "build" : script.name,
                          "destination is not empty: " + destination.string());
    }
    std::filesystem::create_directories(destination);
    GroundTruth truth;
    {
        DiskSink sink(destination);
        truth = Replayer(script, sink).run();
    }
    return Built{open_repo(destination, std::string("main")), std::move(truth)};
}

std::vector<std::string> fixture_names() {
    std::vector<std::string> names;
    for (const auto& f : detail::embedded_fixtures()) {
        std::string name(f.name);
        if (name.size() > 7 && name.substr(name.size() - 7) == ".script") name.resize(name.size() - 7);
        names.push_back(name);
    }
    return names;
}

std::string fixture_text(std::string_view name) {
    for (const auto& f : detail::embedded_fixtures()) {
        if (f.name == std::string(name) + ".script" || f.name == name) return std::string(f.content);
    }
    throw Error("unknown fixture: " + std::string(name));
}

std::vector<NamedFixture> standard_suite() {
    std::vector<NamedFixture> out;
    for (const auto& name : fixture_names()) {
        auto script = parse_script(fixture_text(name));
        auto truth = compute_truth(script);
        out.push_back(NamedFixture{name, std::move(script), std::move(truth)});
    }
    return out;
}

}  // namespace contribsum::synthfix
