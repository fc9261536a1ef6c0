#pragma once

#include <contribsum/attribution.hpp>
#include <contribsum/providers.hpp>
#include <contribsum/store.hpp>
#include <contribsum/tables.hpp>

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

enum class Role {
    technical_leader,
    data_engineer,
    security_engineer,
    devops_engineer,
    backend_engineer,
    frontend_engineer,
    documenter
};
enum class Seniority { junior, senior };

struct RoleAssignment {
    Role role;
    Seniority seniority;

    /// e.g. "Senior Security Engineer".
    std::string label() const;
    /// Accepts exactly "<Junior|Senior> <role name>", case-insensitively.
    static std::optional<RoleAssignment> parse(std::string_view text);
    static const std::vector<std::string>& role_names();
    bool operator==(const RoleAssignment&) const = default;
};

enum class FlagReason { file_not_touched, zero_lines, comment_only_evidence };
std::string_view to_string(FlagReason reason);
std::optional<FlagReason> flag_reason_from_string(std::string_view text);

struct ValidationFlag {
    std::string claim;
    std::string path;
    FlagReason reason;

    bool operator==(const ValidationFlag&) const = default;
};

struct ValidationReport {
    std::vector<ValidationFlag> flags;

    bool clean() const noexcept { return flags.empty(); }
    std::string_view status() const noexcept { return flags.empty() ? "clean" : "flagged"; }
    bool operator==(const ValidationReport&) const = default;
};

struct FileBullet {
    std::string path;
    std::string text;

    bool operator==(const FileBullet&) const = default;
};

struct StudentSummary {
    StudentId student;
    std::string headline;
    std::vector<FileBullet> per_file_bullets;
    std::optional<RoleAssignment> role;
    ValidationReport validation;
    /// Fixed summary issued without a provider call.
    bool no_contributions = false;

    bool operator==(const StudentSummary&) const = default;
};

struct TeamSummary {
    AnalysisWindow window;
    std::string narrative;
    std::vector<std::string> progress_bullets;

    bool operator==(const TeamSummary&) const = default;
};

struct SynthesisBundle {
    std::string team;
    AnalysisWindow window;
    std::vector<StudentId> roster;
    FunctionalityTable functionality;
    ContributionTable contributions;
    std::string sprint_instructions;
    std::string project_description;
    bool roles = false;
};

inline constexpr std::string_view kNoContributions = "No recorded contributions in this window.";

/// Deterministic cross-check of bullet paths against attribution evidence.
ValidationReport validate_summary(const StudentSummary& summary, const ContributionSet& set);

/// Appends one entry priced at the tier's rates (zero when not billable).
LedgerEntry record_usage(CostLedger& ledger, const ModelTier& tier, std::size_t input_tokens,
                         std::size_t output_tokens, std::string run_id = {}, bool billable = true);

/// First and last `keep` lines with an elision marker in between.
std::string clip_lines(std::string_view content, std::size_t keep);

/// Token bucket; a rate of zero disables limiting.
class RateLimiter {
public:
    RateLimiter(double per_second, std::size_t burst);
    void acquire();

private:
    std::mutex mutex_;
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

struct AgentOptions {
    ModelTier analysis{Tier::analysis, "analysis-model", 128000, 0.0, 0.0};
    ModelTier synthesis{Tier::synthesis, "synthesis-model", 128000, 0.0, 0.0};
    std::size_t clip_keep = 200;
    std::size_t concurrency = 4;
    double requests_per_second = 0.0;
    std::string run_id;
};

struct AgentStats {
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t repairs = 0;
};

struct FileJob {
    std::string path;
    std::string content;
    FileMetrics metrics;
    std::string scope;  // content identity, e.g. the blob id
};

struct ContributionJob {
    const FunctionalityRow* row = nullptr;
    ContributionEvidence evidence;
    std::string owned_lines;  // the student's lines in file order
    std::string scope;
};

/// The two-tier prompt chain. Provider replies are cached by
/// (scope, template hash, model, payload hash); every provider call
/// appends one ledger entry.
class Agents {
public:
    Agents(Provider& provider, CostLedger& ledger, Cache* cache, AgentOptions options);

    /// Throws ProviderError, BudgetExceeded, TemplateViolation.
    FunctionalityRow summarize_file(const std::string& path, std::string_view content, const FileMetrics& metrics,
                                    const std::string& scope);

    /// Throws PreconditionViolation when the evidence carries no lines.
    ContributionRow describe_contribution(const FunctionalityRow& row, const ContributionEvidence& evidence,
                                          std::string_view owned_lines, const std::string& scope);

    std::pair<std::vector<StudentSummary>, TeamSummary> synthesize(const SynthesisBundle& bundle,
                                                                   const std::string& scope);

    /// Concurrent batches (in-flight limit plus rate limiting); output
    /// order follows input order.
    std::vector<FunctionalityRow> summarize_files(const std::vector<FileJob>& jobs);
    std::vector<ContributionRow> describe_contributions(const std::vector<ContributionJob>& jobs);

    AgentStats stats() const;
    const AgentOptions& options() const noexcept { return options_; }

private:
    using Checker = std::function<std::optional<std::string>(const std::string&)>;

    std::string ask(const ModelTier& tier, const std::string& template_name, std::vector<Message> messages,
                    const std::string& scope, const Checker& check, const std::string& format);
    Completion send(const ModelTier& tier, const std::vector<Message>& messages);
    std::size_t budget(const ModelTier& tier) const;

    Provider& provider_;
    CostLedger& ledger_;
    Cache* cache_;
    AgentOptions options_;
    RateLimiter limiter_;
    mutable std::mutex stats_mutex_;
    AgentStats stats_;
};

/// Reply parsers; each throws TemplateViolation with the problem.
std::pair<std::string, std::string> parse_functionality_reply(std::string_view text);
std::string parse_contribution_reply(std::string_view text);
StudentSummary parse_student_reply(std::string_view text, const StudentId& student, bool roles);
TeamSummary parse_team_reply(std::string_view text, const AnalysisWindow& window);

}  // namespace contribsum
