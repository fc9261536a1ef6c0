#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/store.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace contribsum {

namespace {
constexpr std::string_view kEntryMagic = "contribsum-cache-v1 ";
}

std::string_view to_string(Tier tier) { return tier == Tier::analysis ? "analysis" : "synthesis"; }

Tier tier_from_string(std::string_view text) {
    if (text == "analysis") return Tier::analysis;
    if (text == "synthesis") return Tier::synthesis;
    throw ConfigError("unknown model tier: " + std::string(text));
}

void ModelTier::validate() const {
    if (model_id.empty()) throw ConfigError(std::string(to_string(tier)) + " tier needs a model id");
    if (max_input_tokens == 0) throw ConfigError(std::string(to_string(tier)) + " tier needs max_input_tokens > 0");
    if (!(cost_per_1k_input >= 0.0) || !(cost_per_1k_output >= 0.0)) {
        throw ConfigError(std::string(to_string(tier)) + " tier rates must be >= 0");
    }
}

CacheKey CacheKey::make(std::string_view scope, std::string_view template_hash, std::string_view model_id,
                        std::string_view payload_hash) {
    std::string material;
    for (auto part : {scope, template_hash, model_id, payload_hash}) {
        material += std::to_string(part.size());
        material += ':';
        material += part;
    }
    return CacheKey{sha256_hex(material)};
}

Cache::Cache(fs::path root, WarningSink warn) : root_(std::move(root)), warn_(std::move(warn)) {}

fs::path Cache::entry_path(const CacheKey& key) const {
    return root_ / key.hex.substr(0, 2) / key.hex.substr(2, 2) / key.hex;
}

std::optional<std::string> Cache::get(const CacheKey& key) const {
    const auto path = entry_path(key);
    std::optional<std::string> raw;
    try {
        raw = try_read_file(path);
    } catch (const IoError&) {
        raw.reset();
    }
    if (!raw) return std::nullopt;
    auto nl = raw->find('\n');
    bool ok = nl != std::string::npos && raw->compare(0, kEntryMagic.size(), kEntryMagic) == 0;
    std::string payload;
    if (ok) {
        auto digest = raw->substr(kEntryMagic.size(), nl - kEntryMagic.size());
        payload = raw->substr(nl + 1);
        ok = digest == sha256_hex(payload);
    }
    if (!ok) {
        if (warn_) warn_("cache entry " + key.hex + " is corrupt; ignoring it");
        return std::nullopt;
    }
    return payload;
}

void Cache::put(const CacheKey& key, std::string_view payload) {
    std::string body(kEntryMagic);
    body += sha256_hex(payload);
    body += '\n';
    body += payload;
    write_file_atomic(entry_path(key), body);
}

namespace {

nlohmann::json entry_json(const LedgerEntry& e) {
    return {{"timestamp", e.timestamp}, {"run_id", e.run_id},           {"tier", to_string(e.tier)},
            {"model_id", e.model_id},   {"input_tokens", e.input_tokens}, {"output_tokens", e.output_tokens},
            {"cost", e.cost}};
}

void accumulate(LedgerTotals& t, const LedgerEntry& e) {
    t.per_tier[e.tier] += e.cost;
    t.total += e.cost;
    t.calls += 1;
    t.input_tokens += e.input_tokens;
    t.output_tokens += e.output_tokens;
}

}  // namespace

CostLedger::CostLedger(fs::path file) : file_(std::move(file)) {
    auto text = try_read_file(*file_);
    if (!text) return;
    std::istringstream in(*text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            LedgerEntry e;
            e.timestamp = j.value("timestamp", "");
            e.run_id = j.value("run_id", "");
            e.tier = tier_from_string(j.at("tier").get<std::string>());
            e.model_id = j.value("model_id", "");
            e.input_tokens = j.at("input_tokens").get<std::size_t>();
            e.output_tokens = j.at("output_tokens").get<std::size_t>();
            e.cost = j.at("cost").get<double>();
            accumulate(totals_, e);
            entries_.push_back(std::move(e));
        } catch (const std::exception&) {
            // A torn final line from a crash is skipped; earlier entries stand.
        }
    }
}

void CostLedger::append(LedgerEntry entry) {
    std::lock_guard lock(mutex_);
    if (file_) {
        std::error_code ec;
        if (file_->has_parent_path()) fs::create_directories(file_->parent_path(), ec);
        std::ofstream out(*file_, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot append to " + file_->string());
        out << entry_json(entry).dump() << '\n';
        out.flush();
        if (!out) throw IoError("cannot append to " + file_->string());
    }
    accumulate(totals_, entry);
    entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> CostLedger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

LedgerTotals CostLedger::totals() const {
    std::lock_guard lock(mutex_);
    return totals_;
}

LedgerTotals CostLedger::totals_for_run(std::string_view run_id) const {
    std::lock_guard lock(mutex_);
    LedgerTotals t;
    for (const auto& e : entries_) {
        if (e.run_id == run_id) accumulate(t, e);
    }
    return t;
}

std::string format_currency(double amount) {
    // Round half away from zero at the cent.
    double cents = std::round(amount * 100.0);
    if (cents == 0.0) cents = 0.0;  // no "-0.00"
    return fmt::format("${:.2f}", cents / 100.0);
}

std::string ledger_report(const CostLedger& ledger, std::optional<std::string> run_id) {
    auto block = [](std::string_view title, const LedgerTotals& t) {
        std::string out = fmt::format("{}\n", title);
        for (auto tier : {Tier::analysis, Tier::synthesis}) {
            auto it = t.per_tier.find(tier);
            out += fmt::format("  {:<10} {:>10}\n", to_string(tier), format_currency(it == t.per_tier.end() ? 0.0 : it->second));
        }
        out += fmt::format("  {:<10} {:>10}\n", "total", format_currency(t.total));
        out += fmt::format("  calls {}, input tokens {}, output tokens {}\n", t.calls, t.input_tokens, t.output_tokens);
        return out;
    };
    std::string out;
    if (run_id) out += block("Run " + *run_id, ledger.totals_for_run(*run_id)) + "\n";
    out += block("Cumulative", ledger.totals());
    return out;
}

StatePaths resolve_state_dir(const fs::path& configured) {
    if (const char* env = std::getenv("CONTRIBSUM_STATE"); env && *env) return StatePaths{fs::path(env)};
    return StatePaths{configured};
}

}  // namespace contribsum
