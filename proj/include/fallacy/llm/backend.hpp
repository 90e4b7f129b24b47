#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/core_types.hpp"
#include "fallacy/errors.hpp"

namespace fallacy::llm {

struct GenerationRequest {
    std::string model_id;
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;
    bool want_logprobs = false;
    std::vector<std::string> stop;
    /// Ask the provider to return the prompt tokens with their logprobs as well
    /// (legacy completions only). Used for per-label sequence scoring.
    bool echo = false;

    /// Throws std::invalid_argument on a broken invariant.
    void validate() const;
};

struct TokenLogProb {
    std::string token;
    double logprob = 0.0;

    friend bool operator==(const TokenLogProb&, const TokenLogProb&) = default;
};

struct GenerationResponse {
    std::string text;
    /// Empty unless logprobs were requested. Concatenated, the token strings
    /// reproduce `text` (see each backend for how tokens are decoded).
    std::vector<TokenLogProb> tokens;
    std::string model_id;
    bool cached = false;

    std::string joined_tokens() const;
};

/// Thrown when logprobs were requested but the provider returned none. The
/// completion itself is still available in `partial`.
struct LogprobsUnavailable : BackendError {
    explicit LogprobsUnavailable(GenerationResponse partial)
        : BackendError("provider returned no logprobs"), partial(std::move(partial)) {}
    GenerationResponse partial;
};

/// Content hash over every field of a request that can change its outcome.
class CacheKey {
public:
    static CacheKey of(const GenerationRequest& request);

    const std::string& hex() const noexcept { return hex_; }

    friend bool operator==(const CacheKey&, const CacheKey&) = default;
    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;

private:
    explicit CacheKey(std::string hex) : hex_(std::move(hex)) {}
    std::string hex_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

/// Canonical serializations. Keys are sorted, so the output is byte-stable.
nlohmann::json to_json(const GenerationRequest& request);
GenerationRequest request_from_json(const nlohmann::json& j);
/// `cached` is deliberately not part of the serialized form.
nlohmann::json to_json(const GenerationResponse& response);
GenerationResponse response_from_json(const nlohmann::json& j);

/// SHA-256 digest of the canonical response serialization.
std::string response_digest(const GenerationResponse& response);

/// Sum of logprobs over the shortest run of tokens whose concatenation
/// contains the label name (case-insensitive). Earliest run wins ties.
/// Throws LabelSpanNotFound if the name does not occur.
double sum_label_logprobs(const GenerationResponse& response, const FallacyLabel& label);

/// Sum of logprobs of the tokens overlapping the byte range
/// [begin, begin + length) of the concatenated token text.
double sum_range_logprobs(const GenerationResponse& response, std::size_t begin, std::size_t length);

}  // namespace fallacy::llm
