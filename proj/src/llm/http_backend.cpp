#include "fallacy/llm/http_backend.hpp"

#include <httplib.h>

namespace fallacy::llm {

using nlohmann::json;

SplitUrl split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("base URL needs a scheme: " + base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.scheme_host_port = base_url;
    } else {
        out.scheme_host_port = base_url.substr(0, path_start);
        out.path_prefix = base_url.substr(path_start);
    }
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    return out;
}

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
    auto split = split_base_url(config_.base_url);
    scheme_host_port_ = split.scheme_host_port;
    path_prefix_ = split.path_prefix;
}

json build_chat_body(const GenerationRequest& r) {
    json body{{"model", r.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", r.prompt}}})},
              {"max_tokens", r.max_tokens},
              {"temperature", r.temperature}};
    if (r.want_logprobs) body["logprobs"] = true;
    if (!r.stop.empty()) body["stop"] = r.stop;
    return body;
}

json build_completions_body(const GenerationRequest& r) {
    json body{{"model", r.model_id}, {"prompt", r.prompt}, {"max_tokens", r.max_tokens}, {"temperature", r.temperature}};
    if (r.want_logprobs || r.echo) body["logprobs"] = 1;
    if (r.echo) body["echo"] = true;
    if (!r.stop.empty()) body["stop"] = r.stop;
    return body;
}

namespace {

const json& first_choice(const json& body) {
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw ProviderError(200, "response has no choices");
    }
    return body["choices"][0];
}

std::string model_of(const json& body, const GenerationRequest& r) {
    if (body.contains("model") && body["model"].is_string()) return body["model"].get<std::string>();
    return r.model_id;
}

}  // namespace

GenerationResponse parse_chat_response(const json& body, const GenerationRequest& r) {
    const json& choice = first_choice(body);
    GenerationResponse out;
    out.model_id = model_of(body, r);
    const json& content = choice.at("message").at("content");
    out.text = content.is_string() ? content.get<std::string>() : std::string{};
    if (!r.want_logprobs) return out;
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object() || !choice["logprobs"].contains("content") ||
        !choice["logprobs"]["content"].is_array()) {
        throw LogprobsUnavailable(out);
    }
    for (const auto& item : choice["logprobs"]["content"]) {
        TokenLogProb t;
        if (item.contains("bytes") && item["bytes"].is_array()) {
            for (const auto& b : item["bytes"]) t.token.push_back(static_cast<char>(b.get<int>()));
        } else {
            t.token = item.at("token").get<std::string>();
        }
        t.logprob = item.at("logprob").is_number() ? item["logprob"].get<double>() : 0.0;
        out.tokens.push_back(std::move(t));
    }
    if (out.tokens.empty() && !out.text.empty()) throw LogprobsUnavailable(out);
    return out;
}

GenerationResponse parse_completions_response(const json& body, const GenerationRequest& r) {
    const json& choice = first_choice(body);
    GenerationResponse out;
    out.model_id = model_of(body, r);
    out.text = choice.value("text", std::string{});
    if (!r.want_logprobs && !r.echo) return out;
    const json* logprobs = choice.contains("logprobs") && choice["logprobs"].is_object() ? &choice["logprobs"] : nullptr;
    if (!logprobs || !logprobs->contains("tokens") || !logprobs->contains("token_logprobs")) {
        throw LogprobsUnavailable(out);
    }
    const auto& tokens = (*logprobs)["tokens"];
    const auto& values = (*logprobs)["token_logprobs"];
    if (tokens.size() != values.size()) throw ProviderError(200, "logprob arrays differ in length");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out.tokens.push_back({tokens[i].get<std::string>(), values[i].is_number() ? values[i].get<double>() : 0.0});
    }
    if (out.tokens.empty() && !out.text.empty()) throw LogprobsUnavailable(out);
    return out;
}

ApiStyle HttpBackend::style_for(const GenerationRequest& request) const {
    if (config_.api != ApiStyle::Auto) return config_.api;
    const auto& m = request.model_id;
    const bool legacy = m.find("instruct") != std::string::npos || m.rfind("davinci", 0) == 0 || m.rfind("babbage", 0) == 0;
    return request.echo || legacy ? ApiStyle::Completions : ApiStyle::Chat;
}

GenerationResponse HttpBackend::generate(const GenerationRequest& request) {
    request.validate();
    const auto style = style_for(request);
    if (request.echo && style != ApiStyle::Completions) {
        throw ProviderError(400, "echo scoring requires the completions api");
    }
    const bool chat = style == ApiStyle::Chat;
    const json body = chat ? build_chat_body(request) : build_completions_body(request);
    const std::string path = path_prefix_ + (chat ? "/chat/completions" : "/completions");

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result) throw TransportError("request to " + scheme_host_port_ + path + " failed: " + httplib::to_string(result.error()));
    if (result->status < 200 || result->status >= 300) {
        std::string message = result->body;
        try {
            auto err = json::parse(result->body);
            if (err.contains("error") && err["error"].is_object() && err["error"].contains("message")) {
                message = err["error"]["message"].get<std::string>();
            }
        } catch (const json::exception&) {
        }
        throw ProviderError(result->status, message);
    }
    json parsed;
    try {
        parsed = json::parse(result->body);
    } catch (const json::exception& e) {
        throw ProviderError(result->status, std::string("malformed JSON response: ") + e.what());
    }
    try {
        return chat ? parse_chat_response(parsed, request) : parse_completions_response(parsed, request);
    } catch (const json::exception& e) {
        throw ProviderError(result->status, std::string("unexpected response shape: ") + e.what());
    }
}

}  // namespace fallacy::llm
