#include "fallacy/llm/mock_backend.hpp"

#include <fstream>

namespace fallacy::llm {

using nlohmann::json;

namespace {

void check_rule(const MockRule& rule) {
    if (!rule.tokens) return;
    std::string joined;
    for (const auto& t : *rule.tokens) {
        if (!(t.logprob <= 0.0)) throw std::invalid_argument("mock token logprob must be <= 0: " + t.token);
        joined += t.token;
    }
    if (joined != rule.text) {
        throw std::invalid_argument("mock tokens do not concatenate to text '" + rule.text + "'");
    }
}

}  // namespace

MockBackend::MockBackend(std::vector<MockRule> rules) {
    for (auto& rule : rules) add_rule(std::move(rule));
}

void MockBackend::add_rule(MockRule rule) {
    check_rule(rule);
    std::lock_guard lock(mutex_);
    rules_.push_back(std::move(rule));
    failures_served_.push_back(0);
}

std::vector<MockRule> mock_rules_from_json(const json& script) {
    std::vector<MockRule> rules;
    for (const auto& r : script.at("rules")) {
        MockRule rule;
        if (r.contains("prompt")) {
            rule.pattern = r.at("prompt").get<std::string>();
        } else if (r.contains("prefix")) {
            rule.pattern = r.at("prefix").get<std::string>();
            rule.prefix = true;
        } else {
            throw std::invalid_argument("mock rule needs \"prompt\" or \"prefix\"");
        }
        if (r.contains("model")) rule.model = r.at("model").get<std::string>();
        rule.text = r.at("text").get<std::string>();
        if (r.contains("tokens")) {
            std::vector<TokenLogProb> tokens;
            for (const auto& t : r.at("tokens")) tokens.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
            rule.tokens = std::move(tokens);
        }
        rule.fail_times = r.value("fail_times", 0);
        rule.fail_status = r.value("fail_status", 0);
        check_rule(rule);
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<MockRule> mock_rules_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mock script " + path.string());
    return mock_rules_from_json(json::parse(in));
}

MockBackend MockBackend::from_json(const json& script) { return MockBackend(mock_rules_from_json(script)); }

MockBackend MockBackend::from_file(const std::filesystem::path& path) { return MockBackend(mock_rules_from_file(path)); }

const MockRule* MockBackend::match(const GenerationRequest& request) const {
    const MockRule* best_prefix = nullptr;
    for (const auto& rule : rules_) {
        if (rule.model && *rule.model != request.model_id) continue;
        if (!rule.prefix) {
            if (rule.pattern == request.prompt) return &rule;
        } else if (request.prompt.starts_with(rule.pattern)) {
            if (!best_prefix || rule.pattern.size() > best_prefix->pattern.size()) best_prefix = &rule;
        }
    }
    return best_prefix;
}

GenerationResponse MockBackend::generate(const GenerationRequest& request) {
    request.validate();
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    const MockRule* rule = match(request);
    if (!rule) {
        std::string head = request.prompt.substr(0, 160);
        throw MockScriptError("mock script has no rule for prompt: " + head + (request.prompt.size() > 160 ? "..." : ""));
    }
    auto index = static_cast<std::size_t>(rule - rules_.data());
    if (failures_served_[index] < rule->fail_times) {
        ++failures_served_[index];
        if (rule->fail_status == 0) throw TransportError("mock transport failure");
        throw ProviderError(rule->fail_status, "mock provider failure");
    }
    GenerationResponse response;
    response.text = rule->text;
    response.model_id = request.model_id;
    if (request.want_logprobs) {
        if (!rule->tokens) throw LogprobsUnavailable(response);
        response.tokens = *rule->tokens;
    }
    return response;
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::vector<GenerationRequest> MockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

json to_json(const MockRule& rule) {
    json j{{rule.prefix ? "prefix" : "prompt", rule.pattern}, {"text", rule.text}};
    if (rule.model) j["model"] = *rule.model;
    if (rule.tokens) {
        json tokens = json::array();
        for (const auto& t : *rule.tokens) tokens.push_back(json::array({t.token, t.logprob}));
        j["tokens"] = tokens;
    }
    if (rule.fail_times) j["fail_times"] = rule.fail_times;
    if (rule.fail_status) j["fail_status"] = rule.fail_status;
    return j;
}

}  // namespace fallacy::llm
