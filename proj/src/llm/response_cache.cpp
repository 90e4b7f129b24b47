#include "fallacy/llm/response_cache.hpp"

#include <sqlite3.h>

namespace fallacy::llm {

namespace {

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
            throw std::runtime_error(std::string("sqlite prepare failed: ") + sqlite3_errmsg(db));
        }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    void bind(int index, const std::string& value) {
        sqlite3_bind_text(stmt_, index, value.data(), static_cast<int>(value.size()), SQLITE_TRANSIENT);
    }
    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw std::runtime_error(std::string("sqlite step failed: ") + sqlite3_errmsg(db_));
    }
    std::string text(int column) const {
        auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, column));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, column))) : std::string{};
    }
    std::int64_t integer(int column) const { return sqlite3_column_int64(stmt_, column); }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string message = err ? err : "unknown error";
        sqlite3_free(err);
        throw std::runtime_error("sqlite exec failed: " + message);
    }
}

}  // namespace

ResponseCache::ResponseCache(const std::filesystem::path& dir) : path_(dir / "responses.sqlite") {
    std::filesystem::create_directories(dir);
    if (sqlite3_open_v2(path_.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        std::string message = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        throw std::runtime_error("cannot open response cache " + path_.string() + ": " + message);
    }
    sqlite3_busy_timeout(db_, 10000);
    exec(db_, "PRAGMA journal_mode=WAL;");
    exec(db_,
         "CREATE TABLE IF NOT EXISTS records ("
         " key TEXT PRIMARY KEY,"
         " request TEXT NOT NULL,"
         " response TEXT NOT NULL);");
}

ResponseCache::~ResponseCache() { sqlite3_close(db_); }

std::optional<CacheRecord> ResponseCache::read(const CacheKey& key) const {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT request, response FROM records WHERE key = ?1;");
    stmt.bind(1, key.hex());
    if (!stmt.step()) return std::nullopt;
    CacheRecord record;
    record.request = request_from_json(nlohmann::json::parse(stmt.text(0)));
    record.response_json = stmt.text(1);
    record.response = response_from_json(nlohmann::json::parse(record.response_json));
    return record;
}

bool ResponseCache::contains(const CacheKey& key) const {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT 1 FROM records WHERE key = ?1;");
    stmt.bind(1, key.hex());
    return stmt.step();
}

void ResponseCache::write(const CacheKey& key, const GenerationRequest& request, const GenerationResponse& response) {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "INSERT OR REPLACE INTO records (key, request, response) VALUES (?1, ?2, ?3);");
    stmt.bind(1, key.hex());
    stmt.bind(2, to_json(request).dump());
    stmt.bind(3, to_json(response).dump());
    stmt.step();
}

CacheStats ResponseCache::stats() const {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT COUNT(*), COALESCE(SUM(LENGTH(request) + LENGTH(response)), 0) FROM records;");
    CacheStats s;
    if (stmt.step()) {
        s.records = static_cast<std::uint64_t>(stmt.integer(0));
        s.bytes = static_cast<std::uint64_t>(stmt.integer(1));
    }
    return s;
}

std::uint64_t ResponseCache::purge() {
    std::uint64_t before = stats().records;
    std::lock_guard lock(mutex_);
    exec(db_, "DELETE FROM records;");
    exec(db_, "VACUUM;");
    return before;
}

}  // namespace fallacy::llm
