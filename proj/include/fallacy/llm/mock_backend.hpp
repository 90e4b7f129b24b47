#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/llm/backend.hpp"

namespace fallacy::llm {

/// One scripted reply. A rule matches a prompt exactly, or by prefix when
/// `prefix` is set. Exact rules win over prefix rules; among prefix rules the
/// longest prefix wins.
struct MockRule {
    std::string pattern;
    bool prefix = false;
    std::optional<std::string> model;
    std::string text;
    /// nullopt: the rule has no logprobs, so requests wanting them fail with
    /// LogprobsUnavailable.
    std::optional<std::vector<TokenLogProb>> tokens;
    /// The first `fail_times` matching calls fail before the reply is served.
    int fail_times = 0;
    /// 0 fails with TransportError, otherwise with ProviderError(status).
    int fail_status = 0;
};

/// Deterministic scripted backend. Unmatched prompts are a hard error.
///
/// Script files are JSON: {"rules": [{"prompt"|"prefix": ..., "text": ...,
/// "tokens": [[token, logprob], ...], "model": ..., "fail_times": n,
/// "fail_status": code}]}. Token strings must concatenate to `text`.
class MockBackend final : public Backend {
public:
    explicit MockBackend(std::vector<MockRule> rules);
    static MockBackend from_json(const nlohmann::json& script);
    static MockBackend from_file(const std::filesystem::path& path);

    GenerationResponse generate(const GenerationRequest& request) override;

    void add_rule(MockRule rule);
    std::size_t calls() const;
    std::vector<GenerationRequest> requests() const;

private:
    const MockRule* match(const GenerationRequest& request) const;

    std::vector<MockRule> rules_;
    std::vector<int> failures_served_;
    std::vector<GenerationRequest> log_;
    mutable std::mutex mutex_;
};

nlohmann::json to_json(const MockRule& rule);
/// Script parsing without building a backend (MockBackend is not movable).
std::vector<MockRule> mock_rules_from_json(const nlohmann::json& script);
std::vector<MockRule> mock_rules_from_file(const std::filesystem::path& path);

}  // namespace fallacy::llm
