#include "fallacy/run_store.hpp"

#include <fstream>
#include <sstream>

namespace fallacy {

namespace fs = std::filesystem;

RunWriter::RunWriter(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) throw ConfigError("cannot open run file " + path.string() + " for writing");
}

RunWriter::~RunWriter() {
    if (file_) std::fclose(file_);
}

void RunWriter::append(const pipeline::Prediction& p) {
    const std::string line = pipeline::to_json(p).dump() + "\n";
    std::lock_guard lock(mutex_);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
        throw ConfigError("write to run file failed");
    }
}

namespace {

struct ParsedRun {
    std::vector<pipeline::Prediction> records;
    std::vector<std::string> good_lines;
    bool torn_tail = false;
};

ParsedRun parse_run(const fs::path& path) {
    ParsedRun out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < content.size()) {
        auto nl = content.find('\n', start);
        if (nl == std::string::npos) nl = content.size();
        lines.push_back(content.substr(start, nl - start));
        start = nl + 1;
    }
    const bool ends_cleanly = content.empty() || content.back() == '\n';
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const bool last = i + 1 == lines.size();
        try {
            out.records.push_back(pipeline::prediction_from_json(nlohmann::json::parse(lines[i])));
            if (last && !ends_cleanly) {
                // complete JSON but missing its newline: keep it, it is whole
            }
            out.good_lines.push_back(lines[i]);
        } catch (const std::exception& e) {
            if (last) {
                out.torn_tail = true;
                continue;
            }
            throw SchemaError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (!ends_cleanly) out.torn_tail = true;
    return out;
}

}  // namespace

std::vector<pipeline::Prediction> read_run(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("run file " + path.string() + " does not exist");
    return parse_run(path).records;
}

std::set<std::string> completed_ids(const fs::path& path) {
    std::set<std::string> ids;
    if (!fs::exists(path)) return ids;
    for (const auto& p : parse_run(path).records) ids.insert(p.sample_id());
    return ids;
}

void repair_run(const fs::path& path) {
    if (!fs::exists(path)) return;
    auto parsed = parse_run(path);
    if (!parsed.torn_tail) return;
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& line : parsed.good_lines) out << line << '\n';
    }
    fs::rename(tmp, path);
}

}  // namespace fallacy
