#pragma once

#include <contribsum/ingest.hpp>
#include <contribsum/store.hpp>

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contribsum {

/// Sections of `key = value` lines. `#` and `;` start comment lines.
using IniDocument = std::map<std::string, std::map<std::string, std::string>>;

/// Throws ConfigError naming the line.
IniDocument parse_ini(std::string_view text);

enum class ProviderMode { mock, replay, record, live };
std::string_view to_string(ProviderMode mode);

struct TeamRepo {
    std::string id;
    std::filesystem::path path;
};

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    std::vector<TeamRepo> teams;
    std::filesystem::path roster;
    std::filesystem::path sprint_instructions;
    std::filesystem::path project_description;
    std::optional<UtcTime> window_start;
    std::optional<UtcTime> window_end;
    std::string window_label;
    std::optional<UtcTime> sprint_start;
    std::optional<int> week;
    std::optional<std::string> branch;
    bool roles = false;
    bool coauthor_split = true;
    std::vector<std::string> include_branches;
    std::vector<std::string> excludes;  // added to the default excludes
    ProviderMode provider = ProviderMode::mock;
    std::filesystem::path replay_dir;
    ModelTier analysis{Tier::analysis, "gpt-4o-mini", 128000, 0.00015, 0.0006};
    ModelTier synthesis{Tier::synthesis, "gpt-4o", 128000, 0.0025, 0.01};
    std::string endpoint;
    std::string api_key;
    std::filesystem::path output_dir = "out";
    std::filesystem::path state_dir = ".contribsum";
    std::size_t team_concurrency = 2;
    std::size_t agent_concurrency = 4;
    double requests_per_second = 0.0;
    std::size_t clip_keep = 200;
};

/// Reads the file; relative paths resolve against its directory.
/// LLM_API_KEY overrides the configured key. Throws ConfigError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// Explicit start/end, else week N from the sprint start (the window runs
/// from the sprint start to the end of week N, labeled "week-N").
AnalysisWindow resolve_window(const RunConfig& config);

/// Pre-flight checks that need no provider call. Throws ConfigError.
void validate(const RunConfig& config);

std::filesystem::path resolve_path(const RunConfig& config, const std::filesystem::path& p);

/// Configuration snapshot for the run manifest; the API key is redacted.
nlohmann::json to_json(const RunConfig& config);

}  // namespace contribsum
