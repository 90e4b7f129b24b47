#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "fallacy/llm/backend.hpp"

namespace fallacy::llm {

/// Auto sends echo requests and completion-only models (names containing
/// "instruct", or the davinci/babbage families) to `/completions` and
/// everything else to `/chat/completions`.
enum class ApiStyle { Chat, Completions, Auto };

struct HttpConfig {
    /// e.g. "https://api.openai.com/v1" or "http://localhost:8000/v1".
    std::string base_url;
    std::string api_key;
    ApiStyle api = ApiStyle::Chat;
    std::chrono::seconds timeout{120};
};

/// Client for OpenAI-compatible `/chat/completions` and `/completions`
/// endpoints with token logprobs.
///
/// Token decoding: a chat token's text is taken from its `bytes` array when
/// the provider sends one (exact UTF-8 bytes), otherwise from `token`. Legacy
/// completions tokens are used verbatim; a null logprob (the first echoed
/// prompt token) reads as 0. Under this rule the concatenated tokens equal the
/// returned text for conforming providers. If a provider disagrees with itself
/// the text is kept as sent and label spans are located on the token side.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpConfig config);

    GenerationResponse generate(const GenerationRequest& request) override;

    const HttpConfig& config() const noexcept { return config_; }
    /// Chat or Completions, never Auto.
    ApiStyle style_for(const GenerationRequest& request) const;

private:
    HttpConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

/// Wire helpers, exposed for tests.
nlohmann::json build_chat_body(const GenerationRequest& request);
nlohmann::json build_completions_body(const GenerationRequest& request);
GenerationResponse parse_chat_response(const nlohmann::json& body, const GenerationRequest& request);
GenerationResponse parse_completions_response(const nlohmann::json& body, const GenerationRequest& request);

struct SplitUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};
SplitUrl split_base_url(const std::string& base_url);

}  // namespace fallacy::llm
