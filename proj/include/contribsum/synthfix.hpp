#pragma once

// Declarative fixture repositories with known ground truth.
//
// A script is a UTF-8 document of directives; commit and merge steps are
// blocks closed by `end`:
//
//   fixture <name>
//   roster <id> | <display name> | <email>, ...
//   window <start> <end> <label>
//   branch <name> from <branch>
//   commit [on <branch>]
//     author <Name> <email>
//     date <YYYY-MM-DDTHH:MM:SSZ>
//     coauthor <Name> <email>
//     message <text>
//     write <path>            | content lines follow, prefixed by "|"
//     generate <path>         | like write; the file is generated, not attributed
//     insert <path> <after>   | new lines after line <after> (0 = top)
//     replace <path> <from> <to>
//     retouch <path> <line>   | one line, differing only in trailing whitespace
//     delete <path> <from> <to>
//     rename <old> <new>
//     remove <path>
//     binary <path> <bytes>
//   end
//   merge <branch> into <branch>
//     author / date / message
//   end
//   checkpoint <label>
//
// Ground truth is computed by replaying the line operations directly; it
// never consults the attribution engine.

#include <contribsum/identity.hpp>
#include <contribsum/ingest.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace contribsum::synthfix {

struct Signature {
    std::string name;
    std::string email;
};

struct EditOp {
    enum class Kind { write, generate, insert, replace, retouch, remove_lines, rename, remove_file, binary };
    Kind kind;
    std::string path;
    std::string new_path;  // rename
    std::size_t from = 0;  // insert: after-line; replace/delete: first line; retouch: line
    std::size_t to = 0;    // replace/delete: last line; binary: byte count
    std::vector<std::string> lines;
};

struct Step {
    enum class Kind { commit, merge, branch, checkpoint };
    Kind kind;
    std::string label;   // step name used in errors, e.g. "commit #3"
    std::string branch;  // commit target, new branch name, merge destination
    std::string source;  // branch source, merge source
    Signature author;
    std::vector<Signature> coauthors;
    std::vector<std::string> message;
    UtcTime date;
    std::vector<EditOp> ops;
};

struct RepoScript {
    std::string name;
    std::string roster_text;
    Roster roster;
    std::optional<AnalysisWindow> window;
    std::vector<Step> steps;
};

/// Throws ScriptError naming the offending line.
RepoScript parse_script(std::string_view text);

struct TruthLine {
    std::string path;
    std::size_t line_no = 0;
    std::string content;
    std::string student;  // roster id or "unmapped"
    ObjectId commit;

    bool operator==(const TruthLine&) const = default;
};

struct TruthChurn {
    std::size_t added = 0;
    std::size_t deleted = 0;

    bool operator==(const TruthChurn&) const = default;
};

struct GroundTruth {
    /// Expected blame of the main tip at each checkpoint; "final" is always present.
    std::map<std::string, std::vector<TruthLine>> checkpoints;
    std::map<std::string, ObjectId> checkpoint_commits;
    /// Window commits on main (author only), by student id; every roster id present.
    std::map<std::string, TruthChurn> churn;
    /// Roster students with no window commit and no co-author credit on main.
    std::vector<std::string> zero_commit_students;
    /// Students credited on window commits (author or co-author), by commit hash.
    std::map<ObjectId, std::vector<std::string>> participants;
    /// Branch -> student -> lines at the branch tip written by commits main never reached.
    std::map<std::string, std::map<std::string, std::size_t>> unmerged_lines;
    /// Paths written through `generate`.
    std::set<std::string> generated_paths;
    AnalysisWindow window;
    ObjectId main_tip;
};

/// Replays the script in memory; commit ids are computed, nothing is written.
GroundTruth compute_truth(const RepoScript& script);

struct Built {
    RepoHandle repo;
    GroundTruth truth;
};

/// Writes the repository (bare layout) into an empty or absent directory.
Built build(const RepoScript& script, const std::filesystem::path& destination);

struct NamedFixture {
    std::string name;
    RepoScript script;
    GroundTruth truth;
};

/// The shipped fixtures (embedded copies of fixtures/*.script).
std::vector<NamedFixture> standard_suite();

/// Raw text of one shipped fixture; throws Error when unknown.
std::string fixture_text(std::string_view name);
std::vector<std::string> fixture_names();

}  // namespace contribsum::synthfix
