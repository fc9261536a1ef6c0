#pragma once

#include <contribsum/timeutil.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

enum class Tier { analysis, synthesis };
std::string_view to_string(Tier tier);
Tier tier_from_string(std::string_view text);  // throws ConfigError

struct ModelTier {
    Tier tier = Tier::analysis;
    std::string model_id;
    std::size_t max_input_tokens = 0;
    double cost_per_1k_input = 0.0;
    double cost_per_1k_output = 0.0;

    /// Throws ConfigError unless max_input_tokens > 0 and rates >= 0.
    void validate() const;
    bool operator==(const ModelTier&) const = default;
};

struct CacheKey {
    std::string hex;  // sha256

    /// Digest over the four parts; each is length-prefixed so no two
    /// distinct tuples collide by concatenation.
    static CacheKey make(std::string_view scope, std::string_view template_hash, std::string_view model_id,
                         std::string_view payload_hash);
    bool operator==(const CacheKey&) const = default;
};

/// One file per entry under cache/<aa>/<bb>/<key>; the first line records
/// the payload's sha256 so torn or tampered entries are detected.
class Cache {
public:
    using WarningSink = std::function<void(const std::string&)>;

    explicit Cache(std::filesystem::path root, WarningSink warn = {});

    /// nullopt when absent or corrupt (corruption is reported to the sink).
    std::optional<std::string> get(const CacheKey& key) const;
    void put(const CacheKey& key, std::string_view payload);

    std::filesystem::path entry_path(const CacheKey& key) const;
    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    WarningSink warn_;
};

struct LedgerEntry {
    std::string timestamp;  // ISO-8601 UTC
    std::string run_id;
    Tier tier = Tier::analysis;
    std::string model_id;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    double cost = 0.0;

    bool operator==(const LedgerEntry&) const = default;
};

struct LedgerTotals {
    std::map<Tier, double> per_tier;
    double total = 0.0;
    std::size_t calls = 0;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
};

/// Append-only; entries are persisted as JSON lines when a file is attached.
class CostLedger {
public:
    CostLedger() = default;
    /// Loads existing entries from `file` (skipping unreadable lines) and
    /// appends new ones to it.
    explicit CostLedger(std::filesystem::path file);

    void append(LedgerEntry entry);
    std::vector<LedgerEntry> entries() const;
    LedgerTotals totals() const;
    LedgerTotals totals_for_run(std::string_view run_id) const;

private:
    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> file_;
    std::vector<LedgerEntry> entries_;
    LedgerTotals totals_;
};

/// Per-tier and grand totals for one run (when given) and cumulatively.
std::string ledger_report(const CostLedger& ledger, std::optional<std::string> run_id = std::nullopt);

std::string format_currency(double amount);

struct StatePaths {
    std::filesystem::path root;
    std::filesystem::path cache() const { return root / "cache"; }
    std::filesystem::path ledger() const { return root / "ledger.jsonl"; }
};

/// CONTRIBSUM_STATE when set, else `configured`.
StatePaths resolve_state_dir(const std::filesystem::path& configured);

}  // namespace contribsum
