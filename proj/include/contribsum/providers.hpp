#pragma once

#include <contribsum/store.hpp>

#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace contribsum {

struct Message {
    std::string role;  // "system", "user" or "assistant"
    std::string content;

    bool operator==(const Message&) const = default;
};

struct Completion {
    std::string text;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    /// False for the offline mock: its calls are ledgered at zero cost.
    bool billable = true;
};

/// ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(const std::vector<Message>& messages);

class Provider {
public:
    virtual ~Provider() = default;
    /// Throws ProviderError.
    virtual Completion send(const std::vector<Message>& messages, const std::string& model_id) = 0;
    virtual std::string name() const = 0;
};

/// Offline, deterministic stand-in for a chat model. Replies follow each
/// prompt's requested format, phrased from keywords found in the prompt.
/// Every request is checked against the per-model budget (80% of
/// max_input_tokens); a request over budget throws PreconditionViolation.
class MockProvider : public Provider {
public:
    explicit MockProvider(std::vector<ModelTier> tiers = {});

    Completion send(const std::vector<Message>& messages, const std::string& model_id) override;
    std::string name() const override { return "mock"; }

    std::size_t calls() const noexcept { return calls_.load(); }
    /// Largest request seen, as a fraction of the model's max_input_tokens.
    double peak_budget_fraction() const;

private:
    std::map<std::string, std::size_t> max_input_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    double peak_ = 0.0;
};

/// Reply text the mock would produce; exposed for tests.
std::string mock_reply(const std::vector<Message>& messages);

/// sha256 over the model id and messages; names the recording file.
std::string request_hash(const std::vector<Message>& messages, const std::string& model_id);

/// Serves recorded exchanges from `dir/<request hash>.json`. In record mode
/// misses are forwarded to `inner` and written back.
class ReplayProvider : public Provider {
public:
    enum class Mode { replay, record };

    ReplayProvider(std::filesystem::path dir, Mode mode, std::shared_ptr<Provider> inner = nullptr);

    Completion send(const std::vector<Message>& messages, const std::string& model_id) override;
    std::string name() const override { return mode_ == Mode::replay ? "replay" : "record"; }

private:
    std::filesystem::path dir_;
    Mode mode_;
    std::shared_ptr<Provider> inner_;
};

struct HttpOptions {
    std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
    std::string api_key;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{120};
    /// Every exchange is also written here when set.
    std::optional<std::filesystem::path> log_dir;
};

/// Chat-completion JSON over HTTP(S): POST {model, messages}; reads
/// choices[0].message.content and usage.{prompt,completion}_tokens, or the
/// flat {text, input_tokens, output_tokens} shape.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpOptions options);

    Completion send(const std::vector<Message>& messages, const std::string& model_id) override;
    std::string name() const override { return "live"; }

    /// Opens a connection and issues a bodiless request; any HTTP status
    /// counts as reachable. Never requests a completion.
    bool reachable(std::string* detail = nullptr) const;

private:
    HttpOptions options_;
};

/// Parses either supported response shape; throws ProviderError.
Completion parse_completion_response(const std::string& body);
nlohmann::json completion_request_json(const std::vector<Message>& messages, const std::string& model_id);

}  // namespace contribsum
