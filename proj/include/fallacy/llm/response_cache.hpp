#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "fallacy/llm/backend.hpp"

struct sqlite3;

namespace fallacy::llm {

struct CacheRecord {
    GenerationRequest request;
    GenerationResponse response;
    /// Exact stored response bytes (canonical JSON).
    std::string response_json;
};

struct CacheStats {
    std::uint64_t records = 0;
    std::uint64_t bytes = 0;
};

/// Content-addressed store of generation results in a single SQLite file.
/// Each record embeds the full request, so the store is self-describing.
/// Safe for concurrent use; identical keys are last-writer-wins.
class ResponseCache {
public:
    /// `dir` is created if needed; the database lives at dir/responses.sqlite.
    explicit ResponseCache(const std::filesystem::path& dir);
    ~ResponseCache();
    ResponseCache(const ResponseCache&) = delete;
    ResponseCache& operator=(const ResponseCache&) = delete;

    std::optional<CacheRecord> read(const CacheKey& key) const;
    void write(const CacheKey& key, const GenerationRequest& request, const GenerationResponse& response);
    bool contains(const CacheKey& key) const;

    CacheStats stats() const;
    /// Removes every record; returns how many were dropped.
    std::uint64_t purge();

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    sqlite3* db_ = nullptr;
    mutable std::mutex mutex_;
};

}  // namespace fallacy::llm
