#include <cstdlib>
#include <fstream>

#include "fallacy/cli.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/llm/http_backend.hpp"
#include "fallacy/llm/mock_backend.hpp"
#include "fallacy/llm/response_cache.hpp"

namespace fallacy::cli {

using nlohmann::json;

json to_json(const RunConfig& c) {
    return json{{"data_dir", c.data_dir},
                {"split", c.split},
                {"mode", c.mode},
                {"generator_model", c.generator_model},
                {"classifier_model", c.classifier_model},
                {"backend", c.backend},
                {"mock_script", c.mock_script},
                {"base_url", c.base_url},
                {"api", c.api},
                {"timeout_seconds", c.timeout_seconds},
                {"concurrency", c.concurrency},
                {"retries", c.retries},
                {"cache_dir", c.cache_dir},
                {"out_dir", c.out_dir},
                {"run_id", c.run_id},
                {"seed", c.seed},
                {"strict", c.strict},
                {"argmax", c.argmax},
                {"definitions", c.definitions},
                {"augment", c.augment},
                {"concise", c.concise},
                {"parallel_chains", c.parallel_chains},
                {"limit", c.limit},
                {"generation_max_tokens", c.generation_max_tokens},
                {"classification_max_tokens", c.classification_max_tokens},
                {"reasoning_max_tokens", c.reasoning_max_tokens}};
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

RunConfig merge_config(RunConfig c, const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const json known = to_json(RunConfig{});
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
        take(j, "data_dir", c.data_dir);
        take(j, "split", c.split);
        take(j, "mode", c.mode);
        take(j, "generator_model", c.generator_model);
        take(j, "classifier_model", c.classifier_model);
        take(j, "backend", c.backend);
        take(j, "mock_script", c.mock_script);
        take(j, "base_url", c.base_url);
        take(j, "api", c.api);
        take(j, "timeout_seconds", c.timeout_seconds);
        take(j, "concurrency", c.concurrency);
        take(j, "retries", c.retries);
        take(j, "cache_dir", c.cache_dir);
        take(j, "out_dir", c.out_dir);
        take(j, "run_id", c.run_id);
        take(j, "seed", c.seed);
        take(j, "strict", c.strict);
        take(j, "argmax", c.argmax);
        take(j, "definitions", c.definitions);
        take(j, "augment", c.augment);
        take(j, "concise", c.concise);
        take(j, "parallel_chains", c.parallel_chains);
        take(j, "limit", c.limit);
        take(j, "generation_max_tokens", c.generation_max_tokens);
        take(j, "classification_max_tokens", c.classification_max_tokens);
        take(j, "reasoning_max_tokens", c.reasoning_max_tokens);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
        return merge_config(std::move(base), json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

std::optional<std::string> api_key_from_env() {
    for (const char* name : {"FALLACY_API_KEY", "OPENAI_API_KEY"}) {
        const char* v = std::getenv(name);
        if (v && *v) return std::string(v);
    }
    return std::nullopt;
}

void validate(const RunConfig& c) {
    pipeline::Mode::parse(c.mode);
    if (!parse_split(c.split)) throw ConfigError("unknown split '" + c.split + "' (expected train, dev or test)");
    if (c.data_dir.empty()) throw ConfigError("no dataset directory given (--data)");
    if (c.concurrency < 1) throw ConfigError("concurrency must be at least 1");
    if (c.retries < 1) throw ConfigError("retries must be at least 1");
    if (c.timeout_seconds < 1) throw ConfigError("timeout must be at least 1 second");
    if (c.generation_max_tokens < 1 || c.classification_max_tokens < 1 || c.reasoning_max_tokens < 1) {
        throw ConfigError("max token limits must be positive");
    }
    if (c.argmax != "greedy" && c.argmax != "per-label") {
        throw ConfigError("unknown argmax '" + c.argmax + "' (expected greedy or per-label)");
    }
    if (c.augment != "ours" && c.augment != "prior") {
        throw ConfigError("unknown augmentation family '" + c.augment + "' (expected ours or prior)");
    }
    if (c.api != "chat" && c.api != "completions" && c.api != "auto") throw ConfigError("unknown api '" + c.api + "'");
    if (!c.definitions.empty() && !std::filesystem::exists(c.definitions)) {
        throw ConfigError("definitions file " + c.definitions + " does not exist");
    }
    if (c.backend == "mock") {
        if (c.mock_script.empty()) throw ConfigError("the mock backend needs --mock-script");
        if (!std::filesystem::exists(c.mock_script)) throw ConfigError("mock script " + c.mock_script + " does not exist");
    } else if (c.backend == "http") {
        if (!api_key_from_env()) {
            throw ConfigError("the http backend needs an API key in FALLACY_API_KEY or OPENAI_API_KEY");
        }
        if (c.argmax == "per-label" && c.api == "chat") {
            throw ConfigError("per-label scoring needs the completions api");
        }
    } else {
        throw ConfigError("unknown backend '" + c.backend + "' (expected mock or http)");
    }
}

pipeline::EngineConfig engine_config(const RunConfig& c) {
    pipeline::EngineConfig e;
    e.generator_model = c.generator_model;
    e.classifier_model = c.classifier_model;
    e.generation = {c.generation_max_tokens, 0.0};
    e.classification = {c.classification_max_tokens, 0.0};
    e.reasoning = {c.reasoning_max_tokens, 0.0};
    e.augment_family = c.augment == "prior" ? prompts::AugmentFamily::Prior : prompts::AugmentFamily::Ours;
    e.concise = c.concise;
    e.argmax = c.argmax == "per-label" ? pipeline::ArgmaxStrategy::PerLabel : pipeline::ArgmaxStrategy::Greedy;
    e.parallel_chains = c.parallel_chains;
    if (!c.definitions.empty()) {
        std::ifstream in(c.definitions);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            e.definitions = prompts::Definitions::parse_tsv(content);
        } catch (const std::invalid_argument& err) {
            throw ConfigError("definitions file " + c.definitions + ": " + err.what());
        }
    }
    return e;
}

BackendStack make_backend(const RunConfig& c) {
    llm::BackendPtr inner;
    if (c.backend == "mock") {
        try {
            inner = std::make_shared<llm::MockBackend>(llm::mock_rules_from_file(c.mock_script));
        } catch (const json::exception& e) {
            throw ConfigError("mock script " + c.mock_script + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError("mock script " + c.mock_script + ": " + e.what());
        }
    } else {
        llm::HttpConfig h;
        h.base_url = c.base_url;
        h.api_key = api_key_from_env().value_or("");
        h.api = c.api == "completions" ? llm::ApiStyle::Completions
              : c.api == "chat"      ? llm::ApiStyle::Chat
                                     : llm::ApiStyle::Auto;
        h.timeout = std::chrono::seconds(c.timeout_seconds);
        try {
            inner = std::make_shared<llm::HttpBackend>(h);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    llm::RetryPolicy policy;
    policy.attempts = c.retries;
    auto retrying = std::make_shared<llm::RetryingBackend>(inner, policy);
    auto throttled = std::make_shared<llm::ThrottledBackend>(retrying, c.concurrency);
    auto cache = std::make_shared<llm::ResponseCache>(c.cache_dir);
    auto caching = std::make_shared<llm::CachingBackend>(throttled, cache);
    return {caching, caching};
}

int exit_code_for(const std::exception_ptr& error) {
    if (!error) return 0;
    try {
        std::rethrow_exception(error);
    } catch (const pipeline::StepFailure& e) {
        return exit_code_for(e.cause);
    } catch (const DataError&) {
        return 2;
    } catch (const BackendError&) {
        return 3;
    } catch (...) {
        return 1;
    }
}

}  // namespace fallacy::cli
