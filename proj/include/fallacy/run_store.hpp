#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "fallacy/pipeline.hpp"

namespace fallacy {

/// Appends Prediction records to a JSON-lines file. Each line is written
/// with a single write and flushed, so an interrupted run leaves at most one
/// torn final line, which readers skip.
class RunWriter {
public:
    /// Opens for append; creates parent directories.
    explicit RunWriter(const std::filesystem::path& path);
    ~RunWriter();
    RunWriter(const RunWriter&) = delete;
    RunWriter& operator=(const RunWriter&) = delete;

    void append(const pipeline::Prediction& p);

private:
    std::FILE* file_ = nullptr;
    std::mutex mutex_;
};

/// Reads every complete record. A malformed final line (torn write) is
/// ignored; a malformed line elsewhere throws SchemaError.
std::vector<pipeline::Prediction> read_run(const std::filesystem::path& path);

/// Sample ids that already have a record, for resuming.
std::set<std::string> completed_ids(const std::filesystem::path& path);

/// Rewrites the file without a torn final line, if there is one.
void repair_run(const std::filesystem::path& path);

}  // namespace fallacy
