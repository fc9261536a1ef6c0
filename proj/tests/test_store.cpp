#include "support.hpp"

#include <contribsum/agents.hpp>
#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/store.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

using namespace contribsum;
using testsupport::TempDir;

TEST(CacheKey, PartsAreLengthPrefixed) {
    EXPECT_NE(CacheKey::make("ab", "c", "m", "p").hex, CacheKey::make("a", "bc", "m", "p").hex);
    EXPECT_NE(CacheKey::make("", "", "", "x").hex, CacheKey::make("x", "", "", "").hex);
    EXPECT_EQ(CacheKey::make("s", "t", "m", "p"), CacheKey::make("s", "t", "m", "p"));
    EXPECT_EQ(CacheKey::make("s", "t", "m", "p").hex.size(), 64u);
}

TEST(Cache, RoundTripAndLayout) {
    TempDir dir;
    Cache cache(dir.path());
    auto key = CacheKey::make("blob", "tmpl", "model", "payload");
    EXPECT_FALSE(cache.get(key));
    cache.put(key, "FUNCTIONALITY: x\nDIFFICULTY: y\n");
    EXPECT_EQ(cache.get(key), "FUNCTIONALITY: x\nDIFFICULTY: y\n");
    auto p = cache.entry_path(key);
    EXPECT_EQ(p.parent_path().filename().string(), key.hex.substr(2, 2));
    EXPECT_EQ(p.parent_path().parent_path().filename().string(), key.hex.substr(0, 2));
    EXPECT_TRUE(std::filesystem::exists(p));
}

TEST(Cache, TamperedEntryIsAMissWithWarning) {
    TempDir dir;
    std::vector<std::string> warnings;
    Cache cache(dir.path(), [&](const std::string& w) { warnings.push_back(w); });
    auto key = CacheKey::make("a", "b", "c", "d");
    cache.put(key, "original reply");
    auto raw = read_file(cache.entry_path(key));
    raw.back() = 'X';
    write_file_atomic(cache.entry_path(key), raw);
    EXPECT_FALSE(cache.get(key));
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find(key.hex), std::string::npos);

    // Truncated to the header only.
    write_file_atomic(cache.entry_path(key), raw.substr(0, 10));
    EXPECT_FALSE(cache.get(key));
    EXPECT_EQ(warnings.size(), 2u);

    cache.put(key, "fresh");
    EXPECT_EQ(cache.get(key), "fresh");
}

TEST(Cache, PayloadsWithAnyBytes) {
    TempDir dir;
    Cache cache(dir.path());
    std::mt19937 rng(7);
    for (int i = 0; i < 50; ++i) {
        std::string payload;
        for (auto n = rng() % 300; n > 0; --n) payload += char(rng() % 256);
        auto key = CacheKey::make(std::to_string(i), "", "", "");
        cache.put(key, payload);
        EXPECT_EQ(cache.get(key), payload);
    }
}

TEST(Ledger, RecordUsageArithmetic) {
    CostLedger ledger;
    ModelTier analysis{Tier::analysis, "small", 8000, 0.0005, 0.0015};
    ModelTier synthesis{Tier::synthesis, "large", 100000, 0.003, 0.015};
    // Hand-computed: 2000*0.0005/1000 + 500*0.0015/1000 = 0.001 + 0.00075
    auto e = record_usage(ledger, analysis, 2000, 500, "r1");
    EXPECT_DOUBLE_EQ(e.cost, 0.00175);
    // 10000*0.003/1000 + 1000*0.015/1000 = 0.03 + 0.015
    e = record_usage(ledger, synthesis, 10000, 1000, "r1");
    EXPECT_DOUBLE_EQ(e.cost, 0.045);
    e = record_usage(ledger, synthesis, 10000, 1000, "r2", /*billable=*/false);
    EXPECT_EQ(e.cost, 0.0);

    auto t = ledger.totals();
    EXPECT_EQ(t.calls, 3u);
    EXPECT_EQ(t.input_tokens, 22000u);
    EXPECT_EQ(t.output_tokens, 2500u);
    EXPECT_DOUBLE_EQ(t.per_tier[Tier::analysis], 0.00175);
    EXPECT_DOUBLE_EQ(t.per_tier[Tier::synthesis], 0.045);
    EXPECT_DOUBLE_EQ(t.total, 0.04675);
    EXPECT_EQ(ledger.totals_for_run("r2").calls, 1u);
    EXPECT_EQ(ledger.totals_for_run("r2").total, 0.0);
    EXPECT_EQ(ledger.totals_for_run("none").calls, 0u);
}

TEST(Ledger, TotalsEqualSumOfEntries) {
    std::mt19937 rng(11);
    CostLedger ledger;
    ModelTier tier{Tier::analysis, "m", 1000, 0.0007, 0.0021};
    double sum = 0;
    std::size_t in = 0, out = 0;
    for (int i = 0; i < 500; ++i) {
        auto a = rng() % 5000, b = rng() % 800;
        auto e = record_usage(ledger, tier, a, b);
        sum += e.cost;
        in += a;
        out += b;
    }
    auto t = ledger.totals();
    EXPECT_NEAR(t.total, sum, 1e-9);
    EXPECT_EQ(t.input_tokens, in);
    EXPECT_EQ(t.output_tokens, out);
    EXPECT_NEAR(t.total, (in * 0.0007 + out * 0.0021) / 1000.0, 1e-9);
}

TEST(Ledger, PersistsAcrossInstancesAndSkipsTornLine) {
    TempDir dir;
    const auto file = dir / "state" / "ledger.jsonl";
    {
        CostLedger ledger(file);
        ledger.append(LedgerEntry{"2024-04-01T00:00:00Z", "r1", Tier::analysis, "m", 10, 5, 0.25});
        ledger.append(LedgerEntry{"2024-04-01T00:00:01Z", "r1", Tier::synthesis, "M", 20, 6, 0.5});
    }
    {
        std::ofstream torn(file, std::ios::app);
        torn << "{\"timestamp\": \"2024-04-01T00:00:02Z\", \"run_id\": \"r1\", \"ti";
    }
    CostLedger again(file);
    ASSERT_EQ(again.entries().size(), 2u);
    EXPECT_EQ(again.entries()[1].model_id, "M");
    EXPECT_DOUBLE_EQ(again.totals().total, 0.75);
}

TEST(Ledger, ConcurrentAppendsAllLand) {
    TempDir dir;
    CostLedger ledger(dir / "ledger.jsonl");
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) ledger.append(LedgerEntry{"t", "r", Tier::analysis, "m", 1, 1, 0.01});
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(ledger.totals().calls, 400u);
    EXPECT_EQ(CostLedger(dir / "ledger.jsonl").entries().size(), 400u);
}

TEST(Ledger, Currency) {
    EXPECT_EQ(format_currency(0.0), "$0.00");
    EXPECT_EQ(format_currency(0.004), "$0.00");
    EXPECT_EQ(format_currency(0.005), "$0.01");
    EXPECT_EQ(format_currency(4.0), "$4.00");
    EXPECT_EQ(format_currency(12.345678), "$12.35");
    EXPECT_EQ(format_currency(-0.001), "$0.00");
}

TEST(Ledger, Report) {
    CostLedger ledger;
    ledger.append(LedgerEntry{"t", "r1", Tier::analysis, "m", 100, 10, 1.25});
    ledger.append(LedgerEntry{"t", "r2", Tier::synthesis, "M", 200, 20, 2.5});
    auto text = ledger_report(ledger, std::string("r2"));
    EXPECT_NE(text.find("Run r2"), std::string::npos);
    EXPECT_NE(text.find("Cumulative"), std::string::npos);
    EXPECT_NE(text.find("$3.75"), std::string::npos);
    EXPECT_NE(text.find("calls 1, input tokens 200, output tokens 20"), std::string::npos);
    EXPECT_NE(text.find("calls 2, input tokens 300, output tokens 30"), std::string::npos);

    auto fresh = ledger_report(CostLedger{});
    EXPECT_EQ(fresh.find("Run "), std::string::npos);
    EXPECT_NE(fresh.find("total"), std::string::npos);
    EXPECT_NE(fresh.find("$0.00"), std::string::npos);
}

TEST(ModelTier, Validation) {
    EXPECT_NO_THROW((ModelTier{Tier::analysis, "m", 1, 0, 0}.validate()));
    EXPECT_THROW((ModelTier{Tier::analysis, "m", 0, 0, 0}.validate()), ConfigError);
    EXPECT_THROW((ModelTier{Tier::analysis, "", 10, 0, 0}.validate()), ConfigError);
    EXPECT_THROW((ModelTier{Tier::analysis, "m", 10, -1, 0}.validate()), ConfigError);
    EXPECT_EQ(tier_from_string("synthesis"), Tier::synthesis);
    EXPECT_THROW(tier_from_string("huge"), ConfigError);
}

TEST(StateDir, EnvironmentOverrides) {
    ::unsetenv("CONTRIBSUM_STATE");
    EXPECT_EQ(resolve_state_dir("configured").root, "configured");
    ::setenv("CONTRIBSUM_STATE", "/tmp/elsewhere", 1);
    auto s = resolve_state_dir("configured");
    ::unsetenv("CONTRIBSUM_STATE");
    EXPECT_EQ(s.root, "/tmp/elsewhere");
    EXPECT_EQ(s.ledger(), std::filesystem::path("/tmp/elsewhere/ledger.jsonl"));
    EXPECT_EQ(s.cache(), std::filesystem::path("/tmp/elsewhere/cache"));
}
