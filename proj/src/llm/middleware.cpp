#include "fallacy/llm/middleware.hpp"

#include <thread>

namespace fallacy::llm {

CachingBackend::CachingBackend(BackendPtr inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

GenerationResponse CachingBackend::generate(const GenerationRequest& request) {
    request.validate();
    const auto key = CacheKey::of(request);
    if (auto record = cache_->read(key)) {
        ++hits_;
        GenerationResponse response = std::move(record->response);
        response.cached = true;
        if (request.want_logprobs && response.tokens.empty()) throw LogprobsUnavailable(response);
        return response;
    }
    ++misses_;
    GenerationResponse response;
    try {
        response = inner_->generate(request);
    } catch (const LogprobsUnavailable& e) {
        cache_->write(key, request, e.partial);
        throw;
    }
    cache_->write(key, request, response);
    response.cached = false;
    return response;
}

RetryingBackend::RetryingBackend(BackendPtr inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)) {
    if (policy_.attempts < 1) throw std::invalid_argument("retry attempts must be >= 1");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace {
bool retryable(const ProviderError& e) { return e.status == 429 || e.status >= 500; }
}  // namespace

GenerationResponse RetryingBackend::generate(const GenerationRequest& request) {
    auto delay = policy_.initial_delay;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->generate(request);
        } catch (const TransportError&) {
            if (attempt >= policy_.attempts) throw;
        } catch (const ProviderError& e) {
            if (!retryable(e) || attempt >= policy_.attempts) throw;
        }
        sleeper_(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy_.multiplier));
    }
}

ThrottledBackend::ThrottledBackend(BackendPtr inner, int max_in_flight)
    : inner_(std::move(inner)), slots_(max_in_flight) {
    if (max_in_flight < 1) throw std::invalid_argument("concurrency limit must be >= 1");
}

GenerationResponse ThrottledBackend::generate(const GenerationRequest& request) {
    slots_.acquire();
    struct Release {
        ThrottledBackend* self;
        ~Release() {
            --self->in_flight_;
            self->slots_.release();
        }
    } release{this};
    int now = ++in_flight_;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    return inner_->generate(request);
}

}  // namespace fallacy::llm
