#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>

#include "fallacy/llm/backend.hpp"
#include "fallacy/llm/response_cache.hpp"

namespace fallacy::llm {

/// Serves repeated requests from the response cache; only misses reach the
/// wrapped backend.
class CachingBackend final : public Backend {
public:
    CachingBackend(BackendPtr inner, std::shared_ptr<ResponseCache> cache);

    GenerationResponse generate(const GenerationRequest& request) override;

    std::uint64_t hits() const noexcept { return hits_; }
    std::uint64_t misses() const noexcept { return misses_; }
    ResponseCache& cache() noexcept { return *cache_; }

private:
    BackendPtr inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_delay{1000};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries transport failures and retryable provider statuses (429, 5xx)
/// with exponential backoff.
class RetryingBackend final : public Backend {
public:
    RetryingBackend(BackendPtr inner, RetryPolicy policy = {}, Sleeper sleeper = {});

    GenerationResponse generate(const GenerationRequest& request) override;

private:
    BackendPtr inner_;
    RetryPolicy policy_;
    Sleeper sleeper_;
};

/// Caps the number of requests in flight across all callers.
class ThrottledBackend final : public Backend {
public:
    ThrottledBackend(BackendPtr inner, int max_in_flight);

    GenerationResponse generate(const GenerationRequest& request) override;

    int peak_in_flight() const noexcept { return peak_; }

private:
    BackendPtr inner_;
    std::counting_semaphore<> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

}  // namespace fallacy::llm
