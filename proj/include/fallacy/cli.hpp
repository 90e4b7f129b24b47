#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/llm/backend.hpp"
#include "fallacy/llm/middleware.hpp"
#include "fallacy/pipeline.hpp"

namespace fallacy::cli {

/// Everything `run` and `ablate` need. Defaults, then the config file, then
/// flags; later sources win.
struct RunConfig {
    std::string data_dir;
    std::string split = "test";
    std::string mode = "prompt-ranking";
    std::string generator_model = "gpt-3.5-turbo-instruct";
    std::string classifier_model = "gpt-3.5-turbo";
    /// "mock" or "http".
    std::string backend = "mock";
    std::string mock_script;
    std::string base_url = "https://api.openai.com/v1";
    /// "auto", "chat" or "completions".
    std::string api = "auto";
    int timeout_seconds = 120;
    int concurrency = 4;
    int retries = 3;
    std::string cache_dir = ".fallacy-cache";
    std::string out_dir = "runs";
    std::string run_id;
    std::uint64_t seed = 0;
    bool strict = false;
    /// "greedy" or "per-label".
    std::string argmax = "greedy";
    std::string definitions;
    /// "ours" or "prior".
    std::string augment = "ours";
    bool concise = true;
    bool parallel_chains = false;
    /// 0 runs the whole split.
    std::size_t limit = 0;
    int generation_max_tokens = 256;
    int classification_max_tokens = 16;
    int reasoning_max_tokens = 256;
};

nlohmann::json to_json(const RunConfig& c);
/// Keys absent from `j` keep the values already in `base`. Unknown keys are
/// a ConfigError.
RunConfig merge_config(RunConfig base, const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Throws ConfigError for an invalid combination. Checks the API key
/// for the http backend, so it runs before any sample.
void validate(const RunConfig& c);

/// FALLACY_API_KEY, then OPENAI_API_KEY.
std::optional<std::string> api_key_from_env();

pipeline::EngineConfig engine_config(const RunConfig& c);

/// Provider client wrapped in retry, throttle and cache layers.
struct BackendStack {
    llm::BackendPtr top;
    std::shared_ptr<llm::CachingBackend> caching;
};
BackendStack make_backend(const RunConfig& c);

/// Process exit code for an exception: 1 config/usage, 2 data, 3 backend.
int exit_code_for(const std::exception_ptr& error);

/// Entry point. Output goes to `out`, diagnostics and the JSON error summary
/// to `err`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fallacy::cli
