#include "generators.hpp"
#include "support.hpp"

#include <contribsum/agents.hpp>
#include <contribsum/error.hpp>
#include <contribsum/linediff.hpp>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <random>

using namespace contribsum;
using testsupport::TempDir;

namespace {

struct Fixture {
    TempDir dir;
    synthfix::RepoScript script;
    synthfix::Built built;

    explicit Fixture(const std::string& name)
        : script(synthfix::parse_script(synthfix::fixture_text(name))), built(synthfix::build(script, dir / "r")) {}

    ContributionSet contributions(AttributionOptions options = AttributionOptions::defaults()) const {
        return build_contribution_set(built.repo, *script.window, script.roster, options);
    }
};

std::map<std::string, std::size_t> owners_of(const std::vector<LineAttribution>& rows, const std::string& path) {
    std::map<std::string, std::size_t> out;
    for (const auto& r : rows) {
        if (r.path == path) ++out[r.student ? r.student->id : std::string(kUnmappedId)];
    }
    return out;
}

const char* kTenLines = R"(fixture ten
roster a | Ann | ann@x.edu
roster b | Ben | ben@x.edu

commit
  author Ann <ann@x.edu>
  date 2024-01-02T10:00:00Z
  message ten lines
  write f.py
  | l1 = 1
  | l2 = 2
  | l3 = 3
  | l4 = 4
  | l5 = 5
  | l6 = 6
  | l7 = 7
  | l8 = 8
  | l9 = 9
  | l10 = 10
end

commit
  author Ben <ben@x.edu>
  date 2024-01-03T10:00:00Z
  message rewrite middle
  replace f.py 3 5
  | m3 = 30
  | m4 = 40
  | m5 = 50
end
)";

StudentSummary claim(const std::string& id, const std::string& name, const std::string& path) {
    StudentSummary s;
    s.student = StudentId{id, name};
    s.headline = "claims";
    s.per_file_bullets.push_back(FileBullet{path, "implemented the logic"});
    return s;
}

}  // namespace

TEST(Blame, SoleAuthorThreeLines) {
    TempDir dir;
    auto built = testsupport::build_script(R"(fixture solo
roster a | Ann | ann@x.edu
commit
  author Ann <ann@x.edu>
  date 2024-01-02T10:00:00Z
  message add
  write x.txt
  | one
  | two
  | three
end
)",
                                           dir / "r");
    auto roster = load_roster("a | Ann | ann@x.edu\n");
    auto rows = blame_snapshot(built.repo, built.repo.head_ref(), roster, default_excludes());
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) EXPECT_EQ(r.student->id, "a");
}

TEST(Blame, RewriteOfThreeLines) {
    TempDir dir;
    auto built = testsupport::build_script(kTenLines, dir / "r");
    auto roster = load_roster("a | Ann | ann@x.edu\nb | Ben | ben@x.edu\n");
    auto rows = blame_snapshot(built.repo, built.repo.head_ref(), roster, default_excludes());
    EXPECT_EQ(owners_of(rows, "f.py"), (std::map<std::string, std::size_t>{{"a", 7}, {"b", 3}}));
    EXPECT_EQ(testsupport::as_truth(rows), built.truth.checkpoints.at("final"));
}

TEST(Blame, RenameKeepsOriginalAuthors) {
    Fixture f("rename");
    auto rows = blame_snapshot(f.built.repo, f.built.repo.head_ref(), f.script.roster, default_excludes());
    EXPECT_EQ(testsupport::as_truth(rows), f.built.truth.checkpoints.at("final"));
    for (const auto& r : rows) EXPECT_NE(r.path, "util.py");
}

TEST(Blame, UnknownCommit) {
    Fixture f("sole_author");
    EXPECT_THROW(blame_snapshot(f.built.repo, std::string(40, 'b'), f.script.roster, {}), UnknownCommit);
}

TEST(Blame, WhitespaceRetouchKeepsOwner) {
    Fixture f("whitespace");
    auto rows = blame_snapshot(f.built.repo, f.built.repo.head_ref(), f.script.roster, default_excludes());
    EXPECT_EQ(testsupport::as_truth(rows), f.built.truth.checkpoints.at("final"));
}

TEST(Blame, GeneratedAndBinaryFilesSkipped) {
    Fixture f("generated");
    auto rows = blame_snapshot(f.built.repo, f.built.repo.head_ref(), f.script.roster, default_excludes());
    for (const auto& r : rows) {
        EXPECT_FALSE(f.built.truth.generated_paths.count(r.path)) << r.path;
        EXPECT_NE(r.path, "logo.png");
    }
}

TEST(Excludes, GlobSemantics) {
    EXPECT_TRUE(is_excluded("package-lock.json", default_excludes()));
    EXPECT_TRUE(is_excluded("web/package-lock.json", default_excludes()));
    EXPECT_TRUE(is_excluded("node_modules/x/index.js", default_excludes()));
    EXPECT_TRUE(is_excluded("static/bundle.min.js", default_excludes()));
    EXPECT_FALSE(is_excluded("src/app.py", default_excludes()));
    EXPECT_TRUE(is_excluded("docs/a.md", {"docs/*"}));
    EXPECT_FALSE(is_excluded("src/docs/a.md", {"docs/*"}));
    EXPECT_TRUE(is_excluded("deep/a.md", {"*.md"}));
}

// Failure modes seen in classroom use.

TEST(FailureMode, CommentInjectionCreditsTheCommitter) {
    Fixture f("comment_injection");
    auto rows = blame_snapshot(f.built.repo, f.built.repo.head_ref(), f.script.roster, default_excludes());
    for (const auto& r : rows) {
        const bool is_comment = r.content.rfind("#", 0) == 0;
        if (r.path == "geo.py" && !r.content.empty()) {
            EXPECT_EQ(r.student->id, is_comment ? "bob" : "alice") << r.content;
        }
        if (r.path == "planner.py") EXPECT_EQ(r.student->id, "alice");
    }
    auto set = f.contributions();
    auto* bob_geo = set.evidence_for("bob", "geo.py");
    ASSERT_TRUE(bob_geo);
    EXPECT_EQ(bob_geo->lines_owned, 3u);
    EXPECT_EQ(bob_geo->code_lines_owned, 0u);
    EXPECT_TRUE(bob_geo->solo_functions.empty());
    EXPECT_FALSE(set.evidence_for("bob", "planner.py"));

    // The comment claims bob wrote planner.py and distance().
    auto fabricated = claim("bob", "Bob Brown", "planner.py");
    fabricated.per_file_bullets.push_back(FileBullet{"geo.py", "implemented distance()"});
    auto report = validate_summary(fabricated, set);
    ASSERT_EQ(report.flags.size(), 2u);
    EXPECT_EQ(report.flags[0].reason, FlagReason::file_not_touched);
    EXPECT_EQ(report.flags[1].reason, FlagReason::comment_only_evidence);
    EXPECT_TRUE(validate_summary(claim("alice", "Alice Adams", "planner.py"), set).clean());
}

TEST(FailureMode, UnmergedBranchInvisibleByDefault) {
    Fixture f("unmerged_branch");
    auto set = f.contributions();
    EXPECT_FALSE(set.evidence_for("bob", "cache.py"));
    EXPECT_TRUE(set.supplements.empty());
    EXPECT_FALSE(set.ownership.count("cache.py"));

    auto options = AttributionOptions::defaults();
    options.include_branches = {"experiment"};
    auto with_branch = f.contributions(options);
    ASSERT_EQ(with_branch.supplements.size(), 1u);
    const auto& supplement = with_branch.supplements[0];
    EXPECT_EQ(supplement.branch, "experiment");
    std::map<std::string, std::size_t> per_student;
    for (const auto& [student, paths] : supplement.unmerged_lines) {
        for (const auto& [path, n] : paths) per_student[student] += n;
    }
    EXPECT_EQ(per_student, f.built.truth.unmerged_lines.at("experiment"));
    EXPECT_TRUE(supplement.unmerged_lines.at("bob").count("cache.py"));
    // The default-branch view is unchanged by the supplement.
    EXPECT_EQ(with_branch.per_student, set.per_student);
}

TEST(FailureMode, MissingIncludedBranchIsNamed) {
    Fixture f("unmerged_branch");
    auto options = AttributionOptions::defaults();
    options.include_branches = {"nope"};
    EXPECT_THROW(f.contributions(options), BranchNotFound);
}

TEST(FailureMode, ZeroCommitStudentListed) {
    Fixture f("zero_commit");
    auto set = f.contributions();
    ASSERT_EQ(set.zero_commit_students.size(), 1u);
    EXPECT_EQ(set.zero_commit_students[0].id, "dana");
    EXPECT_FALSE(set.per_student.count("dana"));
    EXPECT_EQ(f.built.truth.zero_commit_students, std::vector<std::string>{"dana"});
}

TEST(FailureMode, CoauthorSplitOnCreditsBoth) {
    Fixture f("coauthor");
    auto on = f.contributions();
    ASSERT_TRUE(on.evidence_for("alice", "cart.py"));
    ASSERT_TRUE(on.evidence_for("bob", "cart.py"));
    EXPECT_GT(on.evidence_for("bob", "cart.py")->lines_owned, 0u);
    EXPECT_TRUE(on.zero_commit_students.empty());

    auto options = AttributionOptions::defaults();
    options.coauthor_split = false;
    auto off = f.contributions(options);
    EXPECT_TRUE(off.evidence_for("alice", "cart.py"));
    EXPECT_FALSE(off.evidence_for("bob", "cart.py"));
    ASSERT_EQ(off.zero_commit_students.size(), 1u);
    EXPECT_EQ(off.zero_commit_students[0].id, "bob");
}

TEST(FailureMode, CoauthorSplitIsEqual) {
    Fixture f("coauthor");
    auto on = f.contributions();
    const auto a = on.evidence_for("alice", "cart.py")->lines_owned;
    const auto b = on.evidence_for("bob", "cart.py")->lines_owned;
    EXPECT_LE(a > b ? a - b : b - a, 1u);
    EXPECT_EQ(a + b + on.evidence_for("carol", "cart.py")->lines_owned, on.ownership.at("cart.py").line_count);
}

TEST(Contributions, StudentAddsParagraphAndButton) {
    Fixture f("johndoe");
    auto set = f.contributions();
    auto* s2 = set.evidence_for("s2");
    ASSERT_TRUE(s2);
    ASSERT_EQ(s2->size(), 1u);
    EXPECT_EQ((*s2)[0].path, "templates/index.html");
    EXPECT_GT((*s2)[0].lines_added_in_window, 0u);
    EXPECT_LE((*s2)[0].lines_added_in_window, 5u);
    EXPECT_TRUE((*s2)[0].solo_functions.empty());
    ASSERT_EQ(set.zero_commit_students.size(), 1u);
    EXPECT_EQ(set.zero_commit_students[0].id, "s3");
    EXPECT_EQ(set.unmapped_authors, std::vector<std::string>{"CI Bot <ci-bot@builds.example.com>"});
}

TEST(Contributions, SoloFunctionsNeedWholeSpan) {
    Fixture f("interleaved");
    auto set = f.contributions();
    for (const auto& [student, list] : set.per_student) {
        for (const auto& e : list) {
            for (const auto& fn : e.solo_functions) EXPECT_GE(fn.complexity, 1) << fn.name;
        }
    }
    Fixture j("johndoe");
    auto jd = j.contributions();
    auto* auth = jd.evidence_for("jdoe", "auth.py");
    ASSERT_TRUE(auth);
    EXPECT_FALSE(auth->solo_functions.empty());
}

TEST(Contributions, CommitMessagesBelongToTheStudentsWindowCommits) {
    for (const auto& name : synthfix::fixture_names()) {
        Fixture f(name);
        auto set = f.contributions();
        std::map<std::string, std::set<std::string>> messages_by_student;
        for (const auto& c : list_commits(f.built.repo, *f.script.window)) {
            for (const auto& id : f.built.truth.participants.at(c.hash)) messages_by_student[id].insert(c.message);
        }
        for (const auto& [student, list] : set.per_student) {
            for (const auto& e : list) {
                for (const auto& m : e.commit_messages) EXPECT_TRUE(messages_by_student[student].count(m)) << name;
            }
        }
    }
}

TEST(Contributions, SerializationIsDeterministicAndRoundTrips) {
    for (const auto& name : synthfix::fixture_names()) {
        Fixture f(name);
        auto a = serialize(f.contributions());
        auto b = serialize(f.contributions());
        EXPECT_EQ(a, b) << name;
        auto parsed = contribution_set_from_json(nlohmann::json::parse(a));
        EXPECT_EQ(serialize(parsed), a) << name;
    }
}

TEST(Churn, AddThenDeleteIsCountedButNotOwned) {
    TempDir dir;
    auto built = testsupport::build_script(R"(fixture churn
roster a | Ann | ann@x.edu
window 2024-01-01 2024-02-01 jan

commit
  author Ann <ann@x.edu>
  date 2024-01-02T10:00:00Z
  message keep
  write keep.txt
  | keep
end

commit
  author Ann <ann@x.edu>
  date 2024-01-03T10:00:00Z
  message add twenty
  insert keep.txt 1
  | t1
  | t2
  | t3
  | t4
  | t5
  | t6
  | t7
  | t8
  | t9
  | t10
  | t11
  | t12
  | t13
  | t14
  | t15
  | t16
  | t17
  | t18
  | t19
  | t20
end

commit
  author Ann <ann@x.edu>
  date 2024-01-04T10:00:00Z
  message remove them
  delete keep.txt 2 21
end
)",
                                           dir / "r");
    auto roster = load_roster("a | Ann | ann@x.edu\n");
    auto w = AnalysisWindow::make(parse_utc("2024-01-03"), parse_utc("2024-02-01"), "w");
    auto churn = churn_stats(built.repo, w, roster);
    EXPECT_EQ(churn.at("a"), (Churn{20, 20}));
    auto set = build_contribution_set(built.repo, w, roster, AttributionOptions::defaults());
    EXPECT_EQ(set.evidence_for("a", "keep.txt")->lines_added_in_window, 0u);
}

TEST(Churn, NoCommitsAndRenameOnly) {
    TempDir dir;
    auto built = testsupport::build_script(R"(fixture moved
roster a | Ann | ann@x.edu
window 2024-01-04 2024-01-06 move

commit
  author Ann <ann@x.edu>
  date 2024-01-02T10:00:00Z
  message add
  write util.py
  | def slug(s):
  |     return s.lower().replace(" ", "-")
end

commit
  author Ann <ann@x.edu>
  date 2024-01-05T10:00:00Z
  message move
  rename util.py text/helpers.py
end
)",
                                           dir / "r");
    auto roster = load_roster("a | Ann | ann@x.edu\n");
    auto empty = AnalysisWindow::make(parse_utc("2000-01-01"), parse_utc("2000-02-01"), "none");
    EXPECT_EQ(churn_stats(built.repo, empty, roster).at("a"), (Churn{0, 0}));
    auto move = AnalysisWindow::make(parse_utc("2024-01-04"), parse_utc("2024-01-06"), "move");
    EXPECT_EQ(churn_stats(built.repo, move, roster).at("a"), (Churn{0, 0}));
    EXPECT_EQ(built.truth.churn.at("a"), (synthfix::TruthChurn{0, 0}));
}

// Partition and oracle properties over generated histories.

namespace {

void check_partition(const synthfix::Built& built, const synthfix::RepoScript& script, const AnalysisWindow& window,
                     bool split, const std::string& context) {
    auto options = AttributionOptions::defaults();
    options.coauthor_split = split;
    auto set = build_contribution_set(built.repo, window, script.roster, options);
    std::map<std::string, std::size_t> expected_lines;
    if (set.snapshot_commit) {
        for (const auto& f : snapshot(built.repo, *set.snapshot_commit)) {
            if (is_excluded(f.path, options.excludes) || diff::looks_binary(f.content)) continue;
            auto n = diff::split_lines(f.content).size();
            if (n) expected_lines[f.path] = n;
        }
    }
    std::map<std::string, std::size_t> summed;
    for (const auto& [path, own] : set.ownership) {
        std::size_t sum = 0;
        for (const auto& [who, n] : own.owners) sum += n;
        EXPECT_EQ(sum, own.line_count) << context << " " << path;
        summed[path] = sum;
    }
    EXPECT_EQ(summed, expected_lines) << context;
    for (const auto& [student, list] : set.per_student) {
        for (const auto& e : list) {
            auto it = set.ownership.find(e.path);
            const std::size_t owned = it == set.ownership.end() || !it->second.owners.count(student)
                                          ? 0
                                          : it->second.owners.at(student);
            EXPECT_EQ(e.lines_owned, owned) << context << " " << student << " " << e.path;
            EXPECT_LE(e.lines_added_in_window, e.lines_owned);
        }
    }
}

}  // namespace

TEST(AttributionProperty, PartitionOverRandomHistories) {
    std::mt19937 rng(20240501);
    for (int i = 0; i < 100; ++i) {
        const auto text = testsupport::random_history(rng, i);
        auto script = synthfix::parse_script(text);
        TempDir dir;
        auto built = synthfix::build(script, dir / "r");
        auto truth_rows = blame_snapshot(built.repo, built.repo.head_ref(), script.roster, default_excludes());
        ASSERT_EQ(testsupport::as_truth(truth_rows), built.truth.checkpoints.at("final")) << text;
        const auto start = parse_utc("2024-05-01T00:00:00Z") + std::chrono::minutes(rng() % 20);
        const auto window = AnalysisWindow::make(start, start + std::chrono::minutes(1 + rng() % 30), "w");
        check_partition(built, script, window, true, text);
        check_partition(built, script, window, false, text);
    }
}
