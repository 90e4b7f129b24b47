#include "fallacy/llm/backend.hpp"

#include <cmath>
#include <limits>

#include "fallacy/llm/sha256.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::llm {

using nlohmann::json;

void GenerationRequest::validate() const {
    if (prompt.empty()) throw std::invalid_argument("generation request has an empty prompt");
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
}

std::string GenerationResponse::joined_tokens() const {
    std::string out;
    for (const auto& t : tokens) out += t.token;
    return out;
}

json to_json(const GenerationRequest& r) {
    return json{{"model_id", r.model_id},   {"prompt", r.prompt},           {"max_tokens", r.max_tokens},
                {"temperature", r.temperature}, {"want_logprobs", r.want_logprobs}, {"stop", r.stop},
                {"echo", r.echo}};
}

GenerationRequest request_from_json(const json& j) {
    GenerationRequest r;
    r.model_id = j.at("model_id").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.max_tokens = j.at("max_tokens").get<int>();
    r.temperature = j.at("temperature").get<double>();
    r.want_logprobs = j.at("want_logprobs").get<bool>();
    r.stop = j.value("stop", std::vector<std::string>{});
    r.echo = j.value("echo", false);
    return r;
}

json to_json(const GenerationResponse& r) {
    json tokens = json::array();
    for (const auto& t : r.tokens) tokens.push_back(json::array({t.token, t.logprob}));
    return json{{"text", r.text}, {"tokens", tokens}, {"model_id", r.model_id}};
}

GenerationResponse response_from_json(const json& j) {
    GenerationResponse r;
    r.text = j.at("text").get<std::string>();
    r.model_id = j.value("model_id", std::string{});
    for (const auto& t : j.value("tokens", json::array())) {
        if (t.is_array()) {
            r.tokens.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
        } else {
            r.tokens.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
        }
    }
    return r;
}

std::string response_digest(const GenerationResponse& response) {
    return sha256_hex(to_json(response).dump());
}

CacheKey CacheKey::of(const GenerationRequest& request) {
    // The version prefix invalidates every key if the serialization changes.
    return CacheKey(sha256_hex("fallacy-request-v1\n" + to_json(request).dump()));
}

namespace {

struct Span {
    std::size_t first = 0;
    std::size_t last = 0;  // inclusive
};

std::vector<std::size_t> token_offsets(const GenerationResponse& response) {
    std::vector<std::size_t> offsets(response.tokens.size() + 1, 0);
    for (std::size_t i = 0; i < response.tokens.size(); ++i) {
        offsets[i + 1] = offsets[i] + response.tokens[i].token.size();
    }
    return offsets;
}

// Tokens overlapping [begin, end).
std::optional<Span> covering_span(const std::vector<std::size_t>& offsets, std::size_t begin, std::size_t end) {
    std::optional<Span> span;
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
        if (offsets[i + 1] > begin && offsets[i] < end) {
            if (!span) span = Span{i, i};
            span->last = i;
        }
    }
    return span;
}

double sum_span(const GenerationResponse& response, const Span& span) {
    double total = 0.0;
    for (std::size_t i = span.first; i <= span.last; ++i) total += response.tokens[i].logprob;
    return total;
}

}  // namespace

double sum_label_logprobs(const GenerationResponse& response, const FallacyLabel& label) {
    if (response.tokens.empty()) throw LabelSpanNotFound("response has no tokens to score");
    const std::string joined = response.joined_tokens();
    const auto offsets = token_offsets(response);
    const std::string& name = label.name();

    std::optional<Span> best;
    for (std::size_t pos = text::ifind(joined, name); pos != std::string::npos; pos = text::ifind(joined, name, pos + 1)) {
        auto span = covering_span(offsets, pos, pos + name.size());
        if (!span) continue;
        if (!best || span->last - span->first < best->last - best->first) best = span;
    }
    if (!best) throw LabelSpanNotFound("label '" + name + "' not found in response tokens");
    return sum_span(response, *best);
}

double sum_range_logprobs(const GenerationResponse& response, std::size_t begin, std::size_t length) {
    const auto offsets = token_offsets(response);
    auto span = covering_span(offsets, begin, begin + length);
    if (!span) throw LabelSpanNotFound("byte range is not covered by any token");
    return sum_span(response, *span);
}

}  // namespace fallacy::llm
