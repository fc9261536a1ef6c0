#include <contribsum/agents.hpp>
#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/linediff.hpp>
#include <contribsum/templates.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <thread>

namespace contribsum {

// ---------------------------------------------------------------------------
// Roles and flags

const std::vector<std::string>& RoleAssignment::role_names() {
    static const std::vector<std::string> names{"Technical Leader",  "Data Engineer",     "Security Engineer",
                                                "DevOps Engineer",   "Backend Engineer",  "Frontend Engineer",
                                                "Documenter"};
    return names;
}

std::string RoleAssignment::label() const {
    return std::string(seniority == Seniority::senior ? "Senior " : "Junior ") +
           role_names()[static_cast<std::size_t>(role)];
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::optional<RoleAssignment> RoleAssignment::parse(std::string_view text) {
    auto t = lower(trim(text));
    while (!t.empty() && (t.back() == '.' || t.back() == '*')) t.pop_back();
    Seniority s;
    if (t.rfind("junior ", 0) == 0) {
        s = Seniority::junior;
    } else if (t.rfind("senior ", 0) == 0) {
        s = Seniority::senior;
    } else {
        return std::nullopt;
    }
    auto rest = trim(t.substr(7));
    const auto& names = role_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (rest == lower(names[i])) return RoleAssignment{static_cast<Role>(i), s};
    }
    return std::nullopt;
}

std::string_view to_string(FlagReason reason) {
    switch (reason) {
        case FlagReason::file_not_touched: return "file-not-touched";
        case FlagReason::zero_lines: return "zero-lines";
        case FlagReason::comment_only_evidence: return "comment-only-evidence";
    }
    return "unknown";
}

std::optional<FlagReason> flag_reason_from_string(std::string_view text) {
    for (auto r : {FlagReason::file_not_touched, FlagReason::zero_lines, FlagReason::comment_only_evidence}) {
        if (to_string(r) == text) return r;
    }
    return std::nullopt;
}

ValidationReport validate_summary(const StudentSummary& summary, const ContributionSet& set) {
    ValidationReport report;
    for (const auto& b : summary.per_file_bullets) {
        const auto* ev = set.evidence_for(summary.student.id, b.path);
        std::optional<FlagReason> reason;
        if (!ev) {
            reason = FlagReason::file_not_touched;
        } else if (ev->lines_owned == 0 && ev->lines_added_in_window == 0) {
            reason = FlagReason::zero_lines;
        } else if (ev->lines_owned > 0 && ev->code_lines_owned == 0) {
            reason = FlagReason::comment_only_evidence;
        }
        if (reason) report.flags.push_back(ValidationFlag{b.path + ": " + b.text, b.path, *reason});
    }
    return report;
}

LedgerEntry record_usage(CostLedger& ledger, const ModelTier& tier, std::size_t input_tokens,
                         std::size_t output_tokens, std::string run_id, bool billable) {
    LedgerEntry e;
    e.timestamp = format_utc(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
    e.run_id = std::move(run_id);
    e.tier = tier.tier;
    e.model_id = tier.model_id;
    e.input_tokens = input_tokens;
    e.output_tokens = output_tokens;
    e.cost = billable ? (static_cast<double>(input_tokens) * tier.cost_per_1k_input +
                         static_cast<double>(output_tokens) * tier.cost_per_1k_output) /
                            1000.0
                      : 0.0;
    ledger.append(e);
    return e;
}

std::string clip_lines(std::string_view content, std::size_t keep) {
    auto lines = diff::split_lines(content);
    if (lines.size() <= 2 * keep) return std::string(content);
    std::string out;
    for (std::size_t i = 0; i < keep; ++i) out += std::string(lines[i]) + "\n";
    out += fmt::format("[... {} lines elided ...]\n", lines.size() - 2 * keep);
    for (std::size_t i = lines.size() - keep; i < lines.size(); ++i) out += std::string(lines[i]) + "\n";
    return out;
}

RateLimiter::RateLimiter(double per_second, std::size_t burst)
    : rate_(per_second),
      capacity_(static_cast<double>(std::max<std::size_t>(burst, 1))),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

// ---------------------------------------------------------------------------
// Reply parsing

namespace {

/// Splits a reply into KEY: sections. Markdown emphasis around keys is
/// tolerated; text before the first key is ignored.
std::map<std::string, std::vector<std::string>> sections(std::string_view text,
                                                         const std::vector<std::string>& keys) {
    std::map<std::string, std::vector<std::string>> out;
    std::string current;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(pos, end - pos));
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto probe = line;
        probe.erase(0, probe.find_first_not_of(" *#"));
        bool matched = false;
        for (const auto& k : keys) {
            if (probe.rfind(k + ":", 0) == 0) {
                auto rest = probe.substr(k.size() + 1);
                rest.erase(0, rest.find_first_not_of(" *"));
                current = k;
                out[k].push_back(rest);
                matched = true;
                break;
            }
        }
        if (!matched && !current.empty()) out[current].push_back(line);
        if (end == text.size()) break;
    }
    return out;
}

std::string paragraph(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        auto t = trim(l);
        if (t.empty()) continue;
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

std::vector<std::string> bullets(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto t = trim(lines[i]);
        if (t.size() >= 2 && (t[0] == '-' || t[0] == '*') && t[1] == ' ') {
            out.push_back(trim(t.substr(2)));
        } else if (!t.empty() && !out.empty()) {
            out.back() += ' ' + t;
        }
    }
    if (!lines.empty() && !trim(lines[0]).empty()) {
        auto t = trim(lines[0]);
        if (t.size() >= 2 && (t[0] == '-' || t[0] == '*') && t[1] == ' ') out.insert(out.begin(), trim(t.substr(2)));
    }
    return out;
}

std::string clean_path(std::string p) {
    p = trim(p);
    while (!p.empty() && (p.front() == '`' || p.front() == '*' || p.front() == '_')) p.erase(0, 1);
    while (!p.empty() && (p.back() == '`' || p.back() == '*' || p.back() == '_')) p.pop_back();
    // "pages/login.py (Frontend)" -> "pages/login.py"
    if (!p.empty() && p.back() == ')') {
        auto open = p.rfind(" (");
        if (open != std::string::npos) p = trim(p.substr(0, open));
    }
    while (!p.empty() && (p.back() == '`' || p.back() == '*')) p.pop_back();
    return p;
}

}  // namespace

std::pair<std::string, std::string> parse_functionality_reply(std::string_view text) {
    auto s = sections(text, {"FUNCTIONALITY", "DIFFICULTY"});
    auto f = paragraph(s["FUNCTIONALITY"]);
    auto d = paragraph(s["DIFFICULTY"]);
    if (f.empty()) throw TemplateViolation("missing or empty FUNCTIONALITY section");
    if (d.empty()) throw TemplateViolation("missing or empty DIFFICULTY section");
    return {f, d};
}

std::string parse_contribution_reply(std::string_view text) {
    auto s = sections(text, {"DESCRIPTION"});
    auto d = paragraph(s["DESCRIPTION"]);
    if (d.empty()) throw TemplateViolation("missing or empty DESCRIPTION section");
    return d;
}

StudentSummary parse_student_reply(std::string_view text, const StudentId& student, bool roles) {
    auto s = sections(text, {"SUMMARY", "CONTRIBUTIONS", "ROLE"});
    StudentSummary out;
    out.student = student;
    out.headline = paragraph(s["SUMMARY"]);
    if (out.headline.empty()) throw TemplateViolation("missing or empty SUMMARY section");
    if (!s.count("CONTRIBUTIONS")) throw TemplateViolation("missing CONTRIBUTIONS section");
    for (const auto& b : bullets(s["CONTRIBUTIONS"])) {
        auto colon = b.find(": ");
        if (colon == std::string::npos) throw TemplateViolation("contribution bullet without 'path: text': " + b);
        auto path = clean_path(b.substr(0, colon));
        auto body = trim(b.substr(colon + 2));
        if (path.empty() || body.empty()) throw TemplateViolation("contribution bullet without 'path: text': " + b);
        out.per_file_bullets.push_back(FileBullet{path, body});
    }
    if (out.per_file_bullets.empty()) throw TemplateViolation("CONTRIBUTIONS has no bullets");
    if (roles) {
        auto role_text = paragraph(s["ROLE"]);
        if (role_text.empty()) throw TemplateViolation("missing ROLE line");
        out.role = RoleAssignment::parse(role_text);
        if (!out.role) throw TemplateViolation("ROLE must be Junior or Senior followed by one of the listed roles, got '" + role_text + "'");
    }
    return out;
}

TeamSummary parse_team_reply(std::string_view text, const AnalysisWindow& window) {
    auto s = sections(text, {"NARRATIVE", "PROGRESS"});
    TeamSummary t{window, paragraph(s["NARRATIVE"]), {}};
    if (t.narrative.empty()) throw TemplateViolation("missing or empty NARRATIVE section");
    t.progress_bullets = bullets(s["PROGRESS"]);
    if (t.progress_bullets.empty()) throw TemplateViolation("PROGRESS has no bullets");
    return t;
}

// ---------------------------------------------------------------------------
// Agents

namespace {

template <typename Out, typename Fn>
std::vector<Out> parallel_map(std::size_t n, std::size_t limit, Fn fn) {
    std::vector<Out> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(std::max<std::size_t>(limit, 1), n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::string metrics_line(const FileMetrics& m) {
    std::string out = fmt::format("bytes {}, lines {}", m.byte_size, m.line_count);
    if (m.complexity) out += fmt::format(", complexity {}", m.complexity->file_score);
    if (m.tag_count) out += fmt::format(", tags {}", *m.tag_count);
    return out;
}

std::string solo_text(const std::vector<SoloFunction>& fns) {
    if (fns.empty()) return "none";
    std::string out;
    for (const auto& f : fns) {
        if (!out.empty()) out += "; ";
        out += fmt::format("{}:{}", f.name, f.complexity);
    }
    return out;
}

/// Keeps table cells on one line and free of the cell separator.
std::string cell(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '\n' || c == '\r') c = ' ';
        if (c == '|') c = '/';
        out += c;
    }
    return trim(out);
}

std::string first_sentence(std::string_view text) {
    auto end = text.find(". ");
    return std::string(end == std::string_view::npos ? text : text.substr(0, end + 1));
}

std::string window_text(const AnalysisWindow& w) {
    return fmt::format("{} ({} to {})", w.label, format_utc(w.start), format_utc(w.end));
}

const char* kRoleInstructions =
    "\nAlso classify the student into exactly one role: Technical Leader, Data Engineer, Security Engineer, "
    "DevOps Engineer, Backend Engineer, Frontend Engineer or Documenter, with seniority Junior or Senior.\n";
const char* kRoleFormat = "ROLE: <Junior or Senior> <role>";

std::string student_format(bool roles) {
    std::string f =
        "SUMMARY: <one paragraph>\nCONTRIBUTIONS:\n- <file path>: <one sentence>";
    if (roles) f += std::string("\n") + kRoleFormat;
    return f;
}

}  // namespace

Agents::Agents(Provider& provider, CostLedger& ledger, Cache* cache, AgentOptions options)
    : provider_(provider),
      ledger_(ledger),
      cache_(cache),
      options_(std::move(options)),
      limiter_(options_.requests_per_second, std::max<std::size_t>(options_.concurrency, 1)) {
    options_.analysis.validate();
    options_.synthesis.validate();
}

std::size_t Agents::budget(const ModelTier& tier) const { return tier.max_input_tokens * 8 / 10; }

AgentStats Agents::stats() const {
    std::lock_guard lock(stats_mutex_);
    return stats_;
}

Completion Agents::send(const ModelTier& tier, const std::vector<Message>& messages) {
    limiter_.acquire();
    auto c = provider_.send(messages, tier.model_id);
    record_usage(ledger_, tier, c.input_tokens, c.output_tokens, options_.run_id, c.billable);
    std::lock_guard lock(stats_mutex_);
    ++stats_.provider_calls;
    return c;
}

std::string Agents::ask(const ModelTier& tier, const std::string& template_name, std::vector<Message> messages,
                        const std::string& scope, const Checker& check, const std::string& format) {
    const auto& tmpl = prompt_template(template_name);
    const auto& system = prompt_template("system.v1");
    const auto& repair = prompt_template("repair.v1");
    const auto payload = completion_request_json(messages, tier.model_id).dump();
    const auto key = CacheKey::make(scope, tmpl.hash + ":" + system.hash + ":" + repair.hash, tier.model_id,
                                    sha256_hex(payload));
    if (cache_) {
        if (auto hit = cache_->get(key); hit && !check(*hit)) {
            std::lock_guard lock(stats_mutex_);
            ++stats_.cache_hits;
            return *hit;
        }
    }
    if (estimate_tokens(messages) > budget(tier)) {
        throw BudgetExceeded(fmt::format("{} request needs {} tokens; budget is {}", template_name,
                                         estimate_tokens(messages), budget(tier)));
    }
    auto text = send(tier, messages).text;
    if (auto problem = check(text)) {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.repairs;
        }
        messages.push_back(Message{"assistant", text});
        messages.push_back(Message{"user", fill(repair, {{"problem", *problem}, {"format", format}})});
        if (estimate_tokens(messages) > budget(tier)) {
            throw TemplateViolation(template_name + ": " + *problem + " (no budget left for a repair request)");
        }
        text = send(tier, messages).text;
        if (auto again = check(text)) throw TemplateViolation(template_name + ": " + *again + " (after one repair)");
    }
    if (cache_) cache_->put(key, text);
    return text;
}

namespace {

template <typename F>
std::function<std::optional<std::string>(const std::string&)> checker(F parse) {
    return [parse](const std::string& text) -> std::optional<std::string> {
        try {
            parse(text);
            return std::nullopt;
        } catch (const TemplateViolation& e) {
            return std::string(e.what());
        }
    };
}

std::vector<Message> conversation(std::string user) {
    return {Message{"system", trim(prompt_template("system.v1").text)}, Message{"user", std::move(user)}};
}

}  // namespace

FunctionalityRow Agents::summarize_file(const std::string& path, std::string_view content, const FileMetrics& metrics,
                                        const std::string& scope) {
    FunctionalityRow row{path, {}, {}, metrics};
    if (trim(content).empty()) {
        row.functionality = "empty file";
        row.difficulty = "none";
        return row;
    }
    const auto& tmpl = prompt_template("functionality.v1");
    auto build = [&](std::string_view body) {
        return conversation(fill(tmpl, {{"path", path},
                                        {"kind", std::string(to_string(metrics.kind))},
                                        {"metrics", metrics_line(metrics)},
                                        {"content", std::string(body)}}));
    };
    std::size_t keep = options_.clip_keep;
    auto messages = build(clip_lines(content, keep));
    while (estimate_tokens(messages) > budget(options_.analysis)) {
        if (keep == 0) {
            throw BudgetExceeded(fmt::format("{}: prompt does not fit {} tokens even with the content elided", path,
                                             budget(options_.analysis)));
        }
        keep /= 2;
        messages = build(clip_lines(content, keep));
    }
    auto text = ask(options_.analysis, tmpl.name, std::move(messages), scope, checker(parse_functionality_reply),
                    "FUNCTIONALITY: <one paragraph>\nDIFFICULTY: <one paragraph>");
    std::tie(row.functionality, row.difficulty) = parse_functionality_reply(text);
    return row;
}

ContributionRow Agents::describe_contribution(const FunctionalityRow& row, const ContributionEvidence& evidence,
                                              std::string_view owned_lines, const std::string& scope) {
    if (evidence.lines_owned + evidence.lines_added_in_window == 0) {
        throw PreconditionViolation("evidence for " + evidence.student.id + " in " + evidence.path + " has no lines");
    }
    const auto& tmpl = prompt_template("contribution.v1");
    std::string messages_text;
    for (const auto& m : evidence.commit_messages) messages_text += "- " + cell(m) + "\n";
    if (messages_text.empty()) messages_text = "- (none in this window)\n";
    if (!messages_text.empty()) messages_text.pop_back();
    auto build = [&](std::string_view body) {
        return conversation(fill(tmpl, {{"student", evidence.student.display_name},
                                        {"path", evidence.path},
                                        {"functionality", cell(row.functionality)},
                                        {"lines_owned", std::to_string(evidence.lines_owned)},
                                        {"lines_added", std::to_string(evidence.lines_added_in_window)},
                                        {"solo_functions", solo_text(evidence.solo_functions)},
                                        {"commit_messages", messages_text},
                                        {"owned_lines", std::string(body)}}));
    };
    std::size_t keep = options_.clip_keep;
    auto messages = build(clip_lines(owned_lines, keep));
    while (estimate_tokens(messages) > budget(options_.analysis)) {
        if (keep == 0) {
            throw BudgetExceeded(fmt::format("{} / {}: prompt does not fit {} tokens", evidence.student.id,
                                             evidence.path, budget(options_.analysis)));
        }
        keep /= 2;
        messages = build(clip_lines(owned_lines, keep));
    }
    auto text = ask(options_.analysis, tmpl.name, std::move(messages), scope, checker(parse_contribution_reply),
                    "DESCRIPTION: <one or two paragraphs>");
    return ContributionRow{evidence.student, evidence.path, parse_contribution_reply(text), evidence};
}

std::vector<FunctionalityRow> Agents::summarize_files(const std::vector<FileJob>& jobs) {
    return parallel_map<FunctionalityRow>(jobs.size(), options_.concurrency, [&](std::size_t i) {
        const auto& j = jobs[i];
        return summarize_file(j.path, j.content, j.metrics, j.scope);
    });
}

std::vector<ContributionRow> Agents::describe_contributions(const std::vector<ContributionJob>& jobs) {
    return parallel_map<ContributionRow>(jobs.size(), options_.concurrency, [&](std::size_t i) {
        const auto& j = jobs[i];
        return describe_contribution(*j.row, j.evidence, j.owned_lines, j.scope);
    });
}

std::pair<std::vector<StudentSummary>, TeamSummary> Agents::synthesize(const SynthesisBundle& bundle,
                                                                       const std::string& scope) {
    std::map<std::string, const FunctionalityRow*> by_path;
    for (const auto& r : bundle.functionality.rows) by_path[r.path] = &r;

    auto rows_of = [&](const std::string& id) {
        std::vector<const ContributionRow*> out;
        for (const auto& r : bundle.contributions.rows) {
            if (r.student.id == id) out.push_back(&r);
        }
        std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->path < b->path; });
        return out;
    };

    const auto& student_tmpl = prompt_template("student_summary.v1");
    auto build_student = [&](const StudentId& s, const std::vector<const ContributionRow*>& rows, bool terse) {
        std::string frows;
        std::string crows;
        for (const auto* r : rows) {
            auto it = by_path.find(r->path);
            std::string functionality = it == by_path.end() ? "unknown" : cell(it->second->functionality);
            std::string complexity = "n/a";
            if (it != by_path.end() && it->second->metrics.complexity) {
                complexity = std::to_string(it->second->metrics.complexity->file_score);
            }
            std::string description = cell(r->description);
            if (terse) {
                functionality = first_sentence(functionality);
                description = first_sentence(description);
            }
            frows += fmt::format("FILE {} | {} | complexity {}\n", r->path, functionality, complexity);
            crows += fmt::format("CONTRIBUTION {} | {} lines owned, {} written this window | {} | solo: {}\n", r->path,
                                 r->evidence.lines_owned, r->evidence.lines_added_in_window, description,
                                 solo_text(r->evidence.solo_functions));
        }
        if (!frows.empty()) frows.pop_back();
        if (!crows.empty()) crows.pop_back();
        return conversation(fill(student_tmpl, {{"student", s.display_name},
                                                {"window", window_text(bundle.window)},
                                                {"sprint_instructions", trim(bundle.sprint_instructions)},
                                                {"functionality_rows", frows},
                                                {"contribution_rows", crows},
                                                {"role_instructions", bundle.roles ? kRoleInstructions : ""},
                                                {"role_format", bundle.roles ? kRoleFormat : ""}}));
    };

    auto summaries = parallel_map<StudentSummary>(bundle.roster.size(), options_.concurrency, [&](std::size_t i) {
        const auto& s = bundle.roster[i];
        auto rows = rows_of(s.id);
        if (rows.empty()) {
            StudentSummary fixed;
            fixed.student = s;
            fixed.headline = std::string(kNoContributions);
            fixed.no_contributions = true;
            return fixed;
        }
        auto messages = build_student(s, rows, false);
        if (estimate_tokens(messages) > budget(options_.synthesis)) messages = build_student(s, rows, true);
        auto text = ask(options_.synthesis, student_tmpl.name, std::move(messages), scope + ":" + s.id,
                        checker([&](const std::string& t) { parse_student_reply(t, s, bundle.roles); }),
                        student_format(bundle.roles));
        return parse_student_reply(text, s, bundle.roles);
    });

    TeamSummary team{bundle.window, std::string(kNoContributions), {}};
    if (!bundle.contributions.rows.empty()) {
        const auto& team_tmpl = prompt_template("team_summary.v1");
        auto build_team = [&](bool terse) {
            std::map<std::string, std::string> names;
            for (const auto& s : bundle.roster) names[s.id] = s.display_name;
            std::vector<const ContributionRow*> rows;
            for (const auto& r : bundle.contributions.rows) rows.push_back(&r);
            std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
                return std::tie(a->student.id, a->path) < std::tie(b->student.id, b->path);
            });
            std::string srows;
            for (const auto* r : rows) {
                auto name = names.count(r->student.id) ? names[r->student.id] : r->student.display_name;
                srows += fmt::format("STUDENT {} | {} | {}\n", name, r->path,
                                     terse ? "" : first_sentence(cell(r->description)));
            }
            if (!srows.empty()) srows.pop_back();
            return conversation(fill(team_tmpl, {{"team", bundle.team},
                                                 {"window", window_text(bundle.window)},
                                                 {"project_description", trim(bundle.project_description)},
                                                 {"sprint_instructions", trim(bundle.sprint_instructions)},
                                                 {"student_rows", srows}}));
        };
        auto messages = build_team(false);
        if (estimate_tokens(messages) > budget(options_.synthesis)) messages = build_team(true);
        auto text = ask(options_.synthesis, team_tmpl.name, std::move(messages), scope + ":team",
                        checker([&](const std::string& t) { parse_team_reply(t, bundle.window); }),
                        "NARRATIVE: <one paragraph>\nPROGRESS:\n- <one achievement per bullet>");
        team = parse_team_reply(text, bundle.window);
    }
    return {std::move(summaries), std::move(team)};
}

}  // namespace contribsum
