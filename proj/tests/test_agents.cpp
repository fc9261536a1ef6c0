#include "support.hpp"

#include <contribsum/agents.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/metrics.hpp>
#include <contribsum/templates.hpp>

#include <gtest/gtest.h>

#include <deque>
#include <random>
#include <thread>

using namespace contribsum;
using testsupport::TempDir;

namespace {

/// Replies from a queue, or from a function of the request when the queue
/// is empty. Records every request.
class ScriptedProvider : public Provider {
public:
    std::deque<std::string> replies;
    std::function<std::string(const std::vector<Message>&)> fallback;
    std::vector<std::vector<Message>> requests;
    std::size_t input_tokens = 100;
    std::size_t output_tokens = 20;

    Completion send(const std::vector<Message>& messages, const std::string&) override {
        std::string text;
        {
            std::lock_guard lock(mutex_);
            requests.push_back(messages);
            if (!replies.empty()) {
                text = replies.front();
                replies.pop_front();
            }
        }
        if (text.empty()) text = fallback ? fallback(messages) : mock_reply(messages);
        return Completion{text, input_tokens, output_tokens, true};
    }
    std::string name() const override { return "scripted"; }

private:
    std::mutex mutex_;
};

FileMetrics py_metrics(const std::string& path, const std::string& content) { return compute_metrics(path, content); }

AgentOptions cheap_options() {
    AgentOptions o;
    o.analysis = ModelTier{Tier::analysis, "small", 4000, 0.001, 0.002};
    o.synthesis = ModelTier{Tier::synthesis, "large", 8000, 0.01, 0.03};
    o.run_id = "test-run";
    return o;
}

const std::string kGoodFunctionality = "FUNCTIONALITY: Parses login forms.\nDIFFICULTY: Validation edge cases.\n";

ContributionEvidence evidence(const std::string& id, const std::string& path, std::size_t owned, std::size_t code,
                              std::size_t added) {
    ContributionEvidence e;
    e.student = StudentId{id, id};
    e.path = path;
    e.lines_owned = owned;
    e.code_lines_owned = code;
    e.lines_added_in_window = added;
    return e;
}

}  // namespace

// Roles

TEST(Roles, AllFourteenLabelsRoundTrip) {
    const auto& names = RoleAssignment::role_names();
    ASSERT_EQ(names.size(), 7u);
    int n = 0;
    for (std::size_t r = 0; r < names.size(); ++r) {
        for (auto s : {Seniority::junior, Seniority::senior}) {
            RoleAssignment a{static_cast<Role>(r), s};
            EXPECT_EQ(RoleAssignment::parse(a.label()), a);
            ++n;
        }
    }
    EXPECT_EQ(n, 14);
    EXPECT_EQ((RoleAssignment{Role::security_engineer, Seniority::senior}.label()), "Senior Security Engineer");
}

TEST(Roles, ParseIsStrictAboutVocabulary) {
    EXPECT_EQ(RoleAssignment::parse("  junior devops engineer. "), (RoleAssignment{Role::devops_engineer, Seniority::junior}));
    EXPECT_FALSE(RoleAssignment::parse("Senior Wizard"));
    EXPECT_FALSE(RoleAssignment::parse("Backend Engineer"));
    EXPECT_FALSE(RoleAssignment::parse("Mid Backend Engineer"));
    EXPECT_FALSE(RoleAssignment::parse(""));
}

// Validator

TEST(Validator, FlagsEachReason) {
    ContributionSet set;
    set.per_student["ana"] = {evidence("ana", "app.py", 10, 8, 2), evidence("ana", "notes.py", 3, 0, 0),
                              evidence("ana", "gone.py", 0, 0, 0)};
    StudentSummary s;
    s.student = {"ana", "Ana"};
    s.per_file_bullets = {{"app.py", "built the app"},
                          {"notes.py", "wrote the parser"},
                          {"gone.py", "refactored"},
                          {"elsewhere.py", "wrote everything"}};
    auto r = validate_summary(s, set);
    ASSERT_EQ(r.flags.size(), 3u);
    EXPECT_EQ(r.flags[0].path, "notes.py");
    EXPECT_EQ(r.flags[0].reason, FlagReason::comment_only_evidence);
    EXPECT_EQ(r.flags[1].reason, FlagReason::zero_lines);
    EXPECT_EQ(r.flags[2].reason, FlagReason::file_not_touched);
    EXPECT_EQ(r.flags[2].claim, "elsewhere.py: wrote everything");
    EXPECT_EQ(r.status(), "flagged");

    s.per_file_bullets = {{"app.py", "built the app"}};
    EXPECT_TRUE(validate_summary(s, set).clean());
    EXPECT_EQ(validate_summary(s, set).status(), "clean");
}

TEST(Validator, DeletionOnlyEvidenceIsNotFlagged) {
    ContributionSet set;
    set.per_student["bo"] = {evidence("bo", "old.py", 0, 0, 4)};
    StudentSummary s;
    s.student = {"bo", "Bo"};
    s.per_file_bullets = {{"old.py", "rewrote a block"}};
    EXPECT_TRUE(validate_summary(s, set).clean());
}

TEST(Validator, FlagReasonNames) {
    for (auto r : {FlagReason::file_not_touched, FlagReason::zero_lines, FlagReason::comment_only_evidence}) {
        EXPECT_EQ(flag_reason_from_string(to_string(r)), r);
    }
    EXPECT_FALSE(flag_reason_from_string("nope"));
}

// Reply parsers

TEST(Parsers, FunctionalityToleratesMarkdown) {
    auto [f, d] = parse_functionality_reply("Sure!\n**FUNCTIONALITY:** Handles login.\nAlso sessions.\n\n"
                                            "**DIFFICULTY:** Moderate:\nstate handling.\r\n");
    EXPECT_EQ(f, "Handles login. Also sessions.");
    EXPECT_EQ(d, "Moderate: state handling.");
    EXPECT_THROW(parse_functionality_reply("FUNCTIONALITY: x\n"), TemplateViolation);
    EXPECT_THROW(parse_functionality_reply("DIFFICULTY: x\n"), TemplateViolation);
    EXPECT_THROW(parse_functionality_reply("FUNCTIONALITY:\nDIFFICULTY: y"), TemplateViolation);
}

TEST(Parsers, Contribution) {
    EXPECT_EQ(parse_contribution_reply("DESCRIPTION: Wrote login().\n\nAnd logout()."), "Wrote login(). And logout().");
    EXPECT_THROW(parse_contribution_reply("Wrote login()."), TemplateViolation);
}

TEST(Parsers, StudentReply) {
    StudentId ana{"ana", "Ana"};
    const std::string text =
        "SUMMARY: Ana focused on authentication.\n"
        "CONTRIBUTIONS:\n"
        "- `auth/login.py`: Wrote the login view.\n"
        "- **pages/home.html** (Frontend): Built the landing page\n  and its buttons.\n"
        "ROLE: Senior Security Engineer\n";
    auto s = parse_student_reply(text, ana, true);
    EXPECT_EQ(s.headline, "Ana focused on authentication.");
    ASSERT_EQ(s.per_file_bullets.size(), 2u);
    EXPECT_EQ(s.per_file_bullets[0], (FileBullet{"auth/login.py", "Wrote the login view."}));
    EXPECT_EQ(s.per_file_bullets[1], (FileBullet{"pages/home.html", "Built the landing page and its buttons."}));
    EXPECT_EQ(s.role, (RoleAssignment{Role::security_engineer, Seniority::senior}));

    auto no_roles = parse_student_reply(text, ana, false);
    EXPECT_FALSE(no_roles.role);

    EXPECT_THROW(parse_student_reply("SUMMARY: x\nCONTRIBUTIONS:\n- a.py: y\nROLE: Chief Wizard\n", ana, true),
                 TemplateViolation);
    EXPECT_THROW(parse_student_reply("SUMMARY: x\nCONTRIBUTIONS:\n- a.py: y\n", ana, true), TemplateViolation);
    EXPECT_THROW(parse_student_reply("SUMMARY: x\nCONTRIBUTIONS:\n- no colon here\n", ana, false), TemplateViolation);
    EXPECT_THROW(parse_student_reply("SUMMARY: x\nCONTRIBUTIONS:\n", ana, false), TemplateViolation);
    EXPECT_THROW(parse_student_reply("CONTRIBUTIONS:\n- a.py: y\n", ana, false), TemplateViolation);
}

TEST(Parsers, TeamReply) {
    AnalysisWindow w;
    w.label = "Week-1";
    auto t = parse_team_reply("NARRATIVE: Good week.\nPROGRESS:\n- Login works\n* Tests added\n", w);
    EXPECT_EQ(t.narrative, "Good week.");
    EXPECT_EQ(t.progress_bullets, (std::vector<std::string>{"Login works", "Tests added"}));
    EXPECT_EQ(t.window.label, "Week-1");
    EXPECT_THROW(parse_team_reply("NARRATIVE: Good week.\nPROGRESS:\n", w), TemplateViolation);
}

// Usage accounting

TEST(Usage, RecordUsageMatchesRates) {
    CostLedger ledger;
    ModelTier tier{Tier::synthesis, "large", 8000, 0.01, 0.03};
    auto e = record_usage(ledger, tier, 1234, 567, "r");
    EXPECT_NEAR(e.cost, 1234 * 0.01 / 1000 + 567 * 0.03 / 1000, 1e-12);
    EXPECT_EQ(e.tier, Tier::synthesis);
    EXPECT_EQ(e.model_id, "large");
    EXPECT_EQ(e.run_id, "r");
    EXPECT_EQ(e.timestamp.size(), 20u);
    EXPECT_EQ(e.timestamp.back(), 'Z');
}

// Clipping and budget

TEST(Clip, KeepsHeadAndTail) {
    std::string text;
    for (int i = 1; i <= 10; ++i) text += "line" + std::to_string(i) + "\n";
    EXPECT_EQ(clip_lines(text, 5), text);
    EXPECT_EQ(clip_lines(text, 2), "line1\nline2\n[... 6 lines elided ...]\nline9\nline10\n");
    EXPECT_EQ(clip_lines(text, 0), "[... 10 lines elided ...]\n");
}

TEST(Budget, LargeFileIsClippedToFit) {
    std::string content;
    for (int i = 0; i < 3000; ++i) content += "value_" + std::to_string(i) + " = compute(" + std::to_string(i) + ")\n";
    ScriptedProvider p;
    CostLedger ledger;
    auto opts = cheap_options();
    Agents agents(p, ledger, nullptr, opts);
    auto row = agents.summarize_file("big.py", content, py_metrics("big.py", content), "blob");
    ASSERT_EQ(p.requests.size(), 1u);
    EXPECT_LE(estimate_tokens(p.requests[0]), opts.analysis.max_input_tokens * 8 / 10);
    EXPECT_NE(p.requests[0][1].content.find("lines elided"), std::string::npos);
    EXPECT_FALSE(row.functionality.empty());
}

TEST(Budget, UnfittablePromptThrowsWithoutACall) {
    ScriptedProvider p;
    CostLedger ledger;
    auto opts = cheap_options();
    opts.analysis.max_input_tokens = 50;  // the template alone is larger
    Agents agents(p, ledger, nullptr, opts);
    EXPECT_THROW(agents.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "s"), BudgetExceeded);
    EXPECT_TRUE(p.requests.empty());
    EXPECT_EQ(ledger.totals().calls, 0u);
}

TEST(Budget, RequestsStayUnderBudgetOverRandomSizes) {
    std::mt19937 rng(5);
    auto opts = cheap_options();
    opts.clip_keep = 400;
    ScriptedProvider p;
    p.fallback = [](const std::vector<Message>&) { return kGoodFunctionality; };
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, opts);
    for (int i = 0; i < 40; ++i) {
        std::string content;
        const auto lines = rng() % 2000;
        for (std::size_t l = 0; l < lines; ++l) content += std::string(1 + rng() % 120, 'a' + char(rng() % 26)) + "\n";
        if (content.empty()) continue;
        agents.summarize_file("f.py", content, py_metrics("f.py", content), std::to_string(i));
    }
    for (const auto& r : p.requests) EXPECT_LE(estimate_tokens(r), opts.analysis.max_input_tokens * 8 / 10);
}

// Repair

TEST(Repair, OneMalformedReplyIsRepaired) {
    ScriptedProvider p;
    p.replies = {"I think this file does login.", kGoodFunctionality};
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    auto row = agents.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "s");
    EXPECT_EQ(row.functionality, "Parses login forms.");
    ASSERT_EQ(p.requests.size(), 2u);
    const auto& second = p.requests[1];
    ASSERT_EQ(second.size(), 4u);
    EXPECT_EQ(second[2].role, "assistant");
    EXPECT_EQ(second[2].content, "I think this file does login.");
    EXPECT_NE(second[3].content.find("FUNCTIONALITY"), std::string::npos);
    EXPECT_NE(second[3].content.find("could not be used"), std::string::npos);
    EXPECT_EQ(agents.stats().repairs, 1u);
    EXPECT_EQ(agents.stats().provider_calls, 2u);
    EXPECT_EQ(ledger.totals().calls, 2u);
    EXPECT_NEAR(ledger.totals().total, 2 * (100 * 0.001 + 20 * 0.002) / 1000, 1e-12);
}

TEST(Repair, TwoMalformedRepliesFail) {
    ScriptedProvider p;
    p.replies = {"nope", "still nope"};
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    EXPECT_THROW(agents.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "s"), TemplateViolation);
    EXPECT_EQ(p.requests.size(), 2u);
    EXPECT_EQ(ledger.totals().calls, 2u);
}

TEST(Repair, BadRoleIsRepaired) {
    ScriptedProvider p;
    p.replies = {"SUMMARY: s\nCONTRIBUTIONS:\n- a.py: did a\nROLE: Principal Architect\n",
                 "SUMMARY: s\nCONTRIBUTIONS:\n- a.py: did a\nROLE: Junior Backend Engineer\n"};
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    SynthesisBundle b;
    b.team = "t";
    b.roles = true;
    b.roster = {{"ana", "Ana"}};
    b.contributions.rows = {ContributionRow{{"ana", "Ana"}, "a.py", "wrote a", evidence("ana", "a.py", 3, 3, 3)}};
    p.fallback = [](const std::vector<Message>&) { return std::string("NARRATIVE: n\nPROGRESS:\n- p\n"); };
    auto [students, team] = agents.synthesize(b, "snap");
    ASSERT_EQ(students.size(), 1u);
    EXPECT_EQ(students[0].role, (RoleAssignment{Role::backend_engineer, Seniority::junior}));
    EXPECT_EQ(agents.stats().repairs, 1u);
    EXPECT_EQ(team.narrative, "n");
}

// Caching

TEST(Caching, SecondRunHitsCacheAndCostsNothing) {
    TempDir dir;
    Cache cache(dir / "cache");
    ScriptedProvider p;
    CostLedger ledger;
    const std::string content = "def f():\n    return 1\n";
    {
        Agents agents(p, ledger, &cache, cheap_options());
        agents.summarize_file("a.py", content, py_metrics("a.py", content), "blob1");
    }
    EXPECT_EQ(p.requests.size(), 1u);
    Agents agents(p, ledger, &cache, cheap_options());
    auto again = agents.summarize_file("a.py", content, py_metrics("a.py", content), "blob1");
    EXPECT_EQ(p.requests.size(), 1u);
    EXPECT_EQ(agents.stats().cache_hits, 1u);
    EXPECT_EQ(ledger.totals().calls, 1u);
    EXPECT_FALSE(again.functionality.empty());

    // A different scope (new blob) is a miss.
    agents.summarize_file("a.py", content, py_metrics("a.py", content), "blob2");
    EXPECT_EQ(p.requests.size(), 2u);
}

TEST(Caching, ModelChangeIsAMiss) {
    TempDir dir;
    Cache cache(dir / "cache");
    ScriptedProvider p;
    CostLedger ledger;
    Agents first(p, ledger, &cache, cheap_options());
    first.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "b");
    auto opts = cheap_options();
    opts.analysis.model_id = "small-v2";
    Agents second(p, ledger, &cache, opts);
    second.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "b");
    EXPECT_EQ(p.requests.size(), 2u);
}

TEST(Caching, MalformedCachedReplyIsIgnored) {
    TempDir dir;
    Cache cache(dir / "cache");
    ScriptedProvider p;
    CostLedger ledger;
    Agents agents(p, ledger, &cache, cheap_options());
    agents.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "b");
    // Overwrite every entry with a well-formed file holding an unusable reply.
    for (auto& e : std::filesystem::recursive_directory_iterator(dir / "cache")) {
        if (e.is_regular_file()) {
            Cache(dir / "cache").put(CacheKey{e.path().filename().string()}, "garbage");
        }
    }
    agents.summarize_file("a.py", "x = 1\n", py_metrics("a.py", "x = 1\n"), "b");
    EXPECT_EQ(p.requests.size(), 2u);
}

// Short-circuits

TEST(ShortCircuit, EmptyFileAndEmptyStudent) {
    ScriptedProvider p;
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    auto row = agents.summarize_file("empty.py", "  \n", py_metrics("empty.py", "  \n"), "s");
    EXPECT_EQ(row.functionality, "empty file");
    EXPECT_TRUE(p.requests.empty());

    FunctionalityRow fr{"a.py", "f", "d", py_metrics("a.py", "x\n")};
    EXPECT_THROW(agents.describe_contribution(fr, evidence("ana", "a.py", 0, 0, 0), "", "s"), PreconditionViolation);

    SynthesisBundle b;
    b.roster = {{"ana", "Ana"}, {"bo", "Bo"}};
    auto [students, team] = agents.synthesize(b, "snap");
    ASSERT_EQ(students.size(), 2u);
    EXPECT_TRUE(students[0].no_contributions);
    EXPECT_EQ(students[1].headline, kNoContributions);
    EXPECT_EQ(team.narrative, kNoContributions);
    EXPECT_TRUE(p.requests.empty());
}

TEST(Contribution, PromptCarriesEvidence) {
    ScriptedProvider p;
    p.replies = {"DESCRIPTION: Wrote the parser.\n"};
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    FunctionalityRow fr{"a.py", "Parses input|files", "moderate", py_metrics("a.py", "x\n")};
    auto ev = evidence("ana", "a.py", 12, 10, 4);
    ev.solo_functions = {{"parse", 3}};
    ev.commit_messages = {"Add parser\nwith tests"};
    auto row = agents.describe_contribution(fr, ev, "def parse():\n    pass\n", "blob");
    EXPECT_EQ(row.description, "Wrote the parser.");
    EXPECT_EQ(row.evidence, ev);
    const auto& prompt = p.requests.at(0).at(1).content;
    EXPECT_NE(prompt.find("Lines owned in the snapshot: 12"), std::string::npos);
    EXPECT_NE(prompt.find("Lines written during the window: 4"), std::string::npos);
    EXPECT_NE(prompt.find("parse:3"), std::string::npos);
    EXPECT_NE(prompt.find("- Add parser with tests"), std::string::npos);
    EXPECT_NE(prompt.find("Parses input/files"), std::string::npos);
    EXPECT_NE(prompt.find("def parse():"), std::string::npos);
}

// Concurrency

TEST(Concurrency, OutputOrderFollowsInputOrder) {
    ScriptedProvider p;
    std::atomic<int> in_flight{0}, peak{0};
    p.fallback = [&](const std::vector<Message>& m) {
        int now = ++in_flight;
        for (int seen = peak.load(); now > seen && !peak.compare_exchange_weak(seen, now);) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(1 + std::hash<std::string>{}(m[1].content) % 7));
        --in_flight;
        auto pos = m[1].content.find("File: ");
        auto path = m[1].content.substr(pos + 6, m[1].content.find('\n', pos) - pos - 6);
        return "FUNCTIONALITY: about " + path + "\nDIFFICULTY: some\n";
    };
    CostLedger ledger;
    auto opts = cheap_options();
    opts.concurrency = 4;
    Agents agents(p, ledger, nullptr, opts);
    std::vector<FileJob> jobs;
    for (int i = 0; i < 40; ++i) {
        auto path = "f" + std::to_string(i) + ".py";
        jobs.push_back(FileJob{path, "x = " + std::to_string(i) + "\n", py_metrics(path, "x\n"), path});
    }
    auto rows = agents.summarize_files(jobs);
    ASSERT_EQ(rows.size(), jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        EXPECT_EQ(rows[i].path, jobs[i].path);
        EXPECT_EQ(rows[i].functionality, "about " + jobs[i].path);
    }
    EXPECT_LE(peak.load(), 4);
    EXPECT_EQ(ledger.totals().calls, 40u);
}

TEST(Concurrency, FailureSurfacesAfterBatch) {
    ScriptedProvider p;
    p.fallback = [](const std::vector<Message>& m) -> std::string {
        if (m[1].content.find("File: bad.py") != std::string::npos) throw ProviderError("HTTP 400", 1);
        return kGoodFunctionality;
    };
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    std::vector<FileJob> jobs{{"a.py", "x\n", {}, "1"}, {"bad.py", "y\n", {}, "2"}, {"c.py", "z\n", {}, "3"}};
    EXPECT_THROW(agents.summarize_files(jobs), ProviderError);
    EXPECT_EQ(p.requests.size(), 3u);
}

TEST(RateLimit, SpacesRequests) {
    RateLimiter limiter(50.0, 1);
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 6; ++i) limiter.acquire();
    auto elapsed = std::chrono::steady_clock::now() - start;
    EXPECT_GE(elapsed, std::chrono::milliseconds(90));
    RateLimiter off(0.0, 1);
    for (int i = 0; i < 1000; ++i) off.acquire();
}

// Templates

TEST(Templates, ShippedAndFillable) {
    for (auto name : {"system.v1", "functionality.v1", "contribution.v1", "student_summary.v1", "team_summary.v1",
                      "repair.v1"}) {
        const auto& t = prompt_template(name);
        EXPECT_EQ(t.hash.size(), 64u) << name;
    }
    const auto& repair = prompt_template("repair.v1");
    EXPECT_EQ(repair.placeholders, (std::vector<std::string>{"format", "problem"}));
    EXPECT_EQ(fill(repair, {{"problem", "P"}, {"format", "F"}}).find("{{"), std::string::npos);
    EXPECT_THROW(fill(repair, {{"problem", "P"}}), Error);
    EXPECT_THROW(fill(repair, {{"problem", "P"}, {"format", "F"}, {"extra", "E"}}), Error);
    EXPECT_THROW(prompt_template("missing.v9"), Error);
}

TEST(Templates, MockRepliesParseForEveryTask) {
    MockProvider mock;
    ScriptedProvider p;  // falls back to mock_reply
    CostLedger ledger;
    Agents agents(p, ledger, nullptr, cheap_options());
    const std::string content = "import flask\n\ndef login(user):\n    if user:\n        return True\n";
    auto fr = agents.summarize_file("auth.py", content, py_metrics("auth.py", content), "b");
    auto cr = agents.describe_contribution(fr, evidence("ana", "auth.py", 5, 4, 5), content, "b");
    SynthesisBundle b;
    b.roster = {{"ana", "Ana"}};
    b.roles = true;
    b.functionality.rows = {fr};
    b.contributions.rows = {cr};
    auto [students, team] = agents.synthesize(b, "snap");
    EXPECT_TRUE(students[0].role.has_value());
    EXPECT_EQ(students[0].per_file_bullets.at(0).path, "auth.py");
    EXPECT_FALSE(team.progress_bullets.empty());
    EXPECT_EQ(agents.stats().repairs, 0u);
}
