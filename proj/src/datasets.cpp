#include "fallacy/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fallacy/csv.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/random.hpp"
#include "fallacy/resources.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::datasets {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<DatasetSpec>& registry() {
    static const std::vector<DatasetSpec> specs{
        {"PROPAGANDA", 12267, 16, false, true},
        {"ARGOTARIO", 1338, 6, false, true},
        {"LOGIC", 2449, 13, true, false},
        {"COVID-19", 154, 11, false, true},
        {"CLIMATE", 685, 11, false, true},
    };
    return specs;
}

const DatasetSpec& spec_for(std::string_view dataset_id) {
    for (const auto& s : registry()) {
        if (text::iequals(s.dataset_id, text::trim(dataset_id))) return s;
    }
    throw ConfigError("unknown dataset '" + std::string(dataset_id) +
                      "' (expected PROPAGANDA, ARGOTARIO, LOGIC, COVID-19 or CLIMATE)");
}

namespace {

struct MergeGroup {
    std::string target;
    std::vector<std::string> sources;
};

const std::vector<MergeGroup>& merge_groups() {
    static const std::vector<MergeGroup> groups{
        {"Faulty Generalization", {"Hasty Generalization", "Faulty Generalization"}},
        {"Irrelevant Authority",
         {"Fallacy of Credibility", "False Authority", "Appeal to Authority", "Irrelevant Authority"}},
        {"False Causality",
         {"False Cause", "False Causality", "Post Hoc", "Causal Oversimplification"}},
    };
    return groups;
}

// Case, separators and whitespace folded away.
std::string fold(std::string_view s) {
    std::string out;
    for (char c : s) out += (c == '_' || c == '-') ? ' ' : c;
    return text::to_lower(text::collapse_whitespace(out));
}

}  // namespace

std::string merge_labels(std::string_view raw) {
    const auto key = fold(raw);
    for (const auto& g : merge_groups()) {
        for (const auto& s : g.sources) {
            if (fold(s) == key) return g.target;
        }
    }
    return text::collapse_whitespace(raw);
}

std::vector<std::string> merge_source_names() {
    std::vector<std::string> out;
    for (const auto& g : merge_groups()) {
        for (const auto& s : g.sources) {
            if (s != g.target) out.push_back(s);
        }
    }
    return out;
}

SourceLayout SourceLayout::from_json(const json& j) {
    try {
        SourceLayout l;
        l.dataset_id = j.at("dataset").get<std::string>();
        const auto fmt = text::to_lower(j.value("format", std::string("csv")));
        if (fmt == "csv") {
            l.format = SourceFormat::Csv;
        } else if (fmt == "tsv") {
            l.format = SourceFormat::Tsv;
        } else if (fmt == "jsonl") {
            l.format = SourceFormat::Jsonl;
        } else {
            throw ConfigError("unknown source format '" + fmt + "'");
        }
        for (const auto& f : j.at("files")) {
            SourceFile sf{f.at("path").get<std::string>(), std::nullopt};
            if (f.contains("split")) {
                sf.split = parse_split(f["split"].get<std::string>());
                if (!sf.split) throw ConfigError("unknown split in layout file entry " + sf.path);
            }
            l.files.push_back(std::move(sf));
        }
        l.text_column = j.value("text_column", std::string{});
        l.question_column = j.value("question_column", std::string{});
        l.answer_column = j.value("answer_column", std::string{});
        l.label_column = j.at("label_column").get<std::string>();
        l.id_column = j.value("id_column", std::string{});
        if (j.contains("label_aliases")) {
            for (const auto& [k, v] : j["label_aliases"].items()) l.label_aliases[fold(k)] = v.get<std::string>();
        }
        if (j.contains("labels")) l.labels = j["labels"].get<std::vector<std::string>>();
        if (l.text_column.empty() && l.answer_column.empty()) {
            throw ConfigError("layout for " + l.dataset_id + " names neither a text nor an answer column");
        }
        if (l.files.empty()) throw ConfigError("layout for " + l.dataset_id + " lists no files");
        return l;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed dataset layout: ") + e.what());
    }
}

SourceLayout SourceLayout::builtin(std::string_view dataset_id) {
    const auto& spec = spec_for(dataset_id);
    return from_json(json::parse(resources::get("datasets/" + spec.dataset_id + ".layout.json")));
}

SourceLayout SourceLayout::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read layout file " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("layout file " + path.string() + " is not valid JSON: " + e.what());
    }
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

using Record = std::map<std::string, std::string>;

std::vector<Record> read_records(const fs::path& path, SourceFormat format) {
    std::vector<Record> out;
    const auto content = read_file(path);
    if (format == SourceFormat::Jsonl) {
        std::size_t line_no = 0;
        for (const auto& line : text::split(content, '\n')) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (!j.is_object()) throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": not an object");
            Record r;
            for (const auto& [k, v] : j.items()) r[k] = v.is_string() ? v.get<std::string>() : v.dump();
            out.push_back(std::move(r));
        }
        return out;
    }
    std::vector<csv::Row> rows;
    try {
        rows = csv::parse(content, format == SourceFormat::Tsv ? '\t' : ',', format == SourceFormat::Csv);
    } catch (const std::runtime_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    if (rows.empty()) throw SchemaError(path.string() + " is empty");
    const auto& header = rows.front();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        Record r;
        for (std::size_t c = 0; c < header.size(); ++c) {
            r[std::string(text::trim(header[c]))] = c < rows[i].size() ? rows[i][c] : std::string{};
        }
        out.push_back(std::move(r));
    }
    return out;
}

void require_column(const std::vector<Record>& records, const std::string& column, const fs::path& file) {
    if (column.empty() || records.empty()) return;
    if (!records.front().contains(column)) {
        throw SchemaError(file.string() + " has no column '" + column + "'");
    }
}

std::string field(const Record& r, const std::string& column) {
    auto it = r.find(column);
    return it == r.end() ? std::string{} : std::string(text::trim(it->second));
}

// Labels found in the data, sorted, No-Fallacy last.
std::vector<std::string> inventory_from(const std::vector<std::string>& seen) {
    std::vector<std::string> out(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::stable_partition(out.begin(), out.end(), [](const std::string& l) { return !is_no_fallacy(FallacyLabel(l)); });
    return out;
}

}  // namespace

LoadedDataset load_dataset(const DatasetSpec& spec, const fs::path& dir, Strictness strictness,
                           const std::optional<SourceLayout>& layout_override) {
    const SourceLayout layout = layout_override ? *layout_override : SourceLayout::builtin(spec.dataset_id);
    struct Raw {
        std::string id;
        std::string text;
        std::string label;
        bool predefined_test;
    };
    std::vector<Raw> raw;
    LoadedDataset out;
    out.spec = spec;
    std::size_t skipped = 0;

    for (const auto& file : layout.files) {
        const fs::path path = dir / file.path;
        if (!fs::exists(path)) throw DataError("missing source file " + path.string());
        auto records = read_records(path, layout.format);
        require_column(records, layout.text_column, path);
        require_column(records, layout.question_column, path);
        require_column(records, layout.answer_column, path);
        require_column(records, layout.label_column, path);
        require_column(records, layout.id_column, path);
        std::size_t row = 0;
        for (const auto& r : records) {
            ++row;
            std::string body;
            if (!layout.answer_column.empty()) {
                const auto q = field(r, layout.question_column);
                const auto a = field(r, layout.answer_column);
                body = q.empty() ? a : "Q: " + q + " A: " + a;
                if (a.empty()) body.clear();
            } else {
                body = field(r, layout.text_column);
            }
            auto label = field(r, layout.label_column);
            if (body.empty() || label.empty()) {
                ++skipped;
                continue;
            }
            label = merge_labels(label);
            if (auto it = layout.label_aliases.find(fold(label)); it != layout.label_aliases.end()) label = it->second;
            std::string id = layout.id_column.empty() ? std::string{} : field(r, layout.id_column);
            if (id.empty()) id = spec.dataset_id + "-" + fs::path(file.path).stem().string() + "-" + std::to_string(row);
            raw.push_back({std::move(id), std::move(body), std::move(label), file.split == Split::Test});
        }
    }
    if (skipped) out.warnings.push_back(std::to_string(skipped) + " rows without text or label were skipped");

    std::vector<std::string> names = layout.labels;
    if (names.empty()) {
        std::vector<std::string> seen;
        for (const auto& r : raw) seen.push_back(r.label);
        names = inventory_from(seen);
    }
    std::vector<FallacyLabel> label_list;
    for (const auto& n : names) label_list.emplace_back(n);
    out.labels = LabelSet(spec.dataset_id, std::move(label_list));

    std::set<std::string> ids;
    for (auto& r : raw) {
        auto label = out.labels.find(r.label);
        if (!label) throw UnknownLabel("label '" + r.label + "' of " + r.id + " is not in the " + spec.dataset_id + " label set");
        if (!ids.insert(r.id).second) throw SchemaError("duplicate sample id " + r.id);
        if (r.predefined_test) out.predefined_test.insert(r.id);
        out.samples.push_back(make_sample(r.id, r.text, *label, out.labels, Split::Train));
    }

    std::vector<std::string> mismatches;
    if (out.samples.size() != spec.expected_n) {
        mismatches.push_back("expected " + std::to_string(spec.expected_n) + " samples, found " +
                             std::to_string(out.samples.size()));
    }
    if (out.labels.size() != spec.expected_c) {
        mismatches.push_back("expected " + std::to_string(spec.expected_c) + " classes, found " +
                             std::to_string(out.labels.size()));
    }
    if (!mismatches.empty()) {
        const auto msg = spec.dataset_id + ": " + text::join(mismatches, "; ");
        if (strictness == Strictness::Fail) throw CountMismatch(msg);
        out.warnings.push_back(msg);
    }
    return out;
}

namespace {

// Largest remainder over integer percentages.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<std::size_t>& weights) {
    const std::size_t total = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
    std::vector<std::size_t> parts;
    std::vector<std::size_t> remainders;
    std::size_t assigned = 0;
    for (auto w : weights) {
        parts.push_back(n * w / total);
        remainders.push_back(n * w % total);
        assigned += parts.back();
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainders[a] > remainders[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++parts[order[i]];
    return parts;
}

}  // namespace

SplitSizes split_sizes(std::size_t n) {
    auto p = apportion(n, {65, 15, 20});
    return {p[0], p[1], p[2]};
}

SplitSizes train_dev_sizes(std::size_t n) {
    auto p = apportion(n, {65, 15});
    return {p[0], p[1], 0};
}

SplitSizes SplitAssignment::sizes() const {
    SplitSizes s;
    for (const auto& [id, split] : by_id) {
        switch (split) {
            case Split::Train: ++s.train; break;
            case Split::Dev: ++s.dev; break;
            case Split::Test: ++s.test; break;
        }
    }
    return s;
}

SplitAssignment split_dataset(const LoadedDataset& data, std::uint64_t seed) {
    SplitAssignment out;
    out.seed = seed;
    std::vector<std::string> pool;
    for (const auto& s : data.samples) {
        if (data.predefined_test.contains(s.id)) {
            out.by_id[s.id] = Split::Test;
        } else {
            pool.push_back(s.id);
        }
    }
    Rng rng(seed);
    rng.shuffle(pool);
    const auto sizes = data.predefined_test.empty() ? split_sizes(pool.size()) : train_dev_sizes(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        Split split = Split::Test;
        if (i < sizes.train) {
            split = Split::Train;
        } else if (i < sizes.train + sizes.dev) {
            split = Split::Dev;
        }
        out.by_id[pool[i]] = split;
    }
    return out;
}

std::vector<Sample> apply_split(const std::vector<Sample>& samples, const SplitAssignment& assignment) {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (auto s : samples) {
        auto it = assignment.by_id.find(s.id);
        if (it == assignment.by_id.end()) throw DataError("sample " + s.id + " has no split assignment");
        s.split = it->second;
        out.push_back(std::move(s));
    }
    return out;
}

std::map<Split, std::map<std::string, std::size_t>> label_distribution(const std::vector<Sample>& samples) {
    std::map<Split, std::map<std::string, std::size_t>> out;
    for (const auto& s : samples) ++out[s.split][s.gold_label.name()];
    return out;
}

void write_canonical(const fs::path& dir, const LoadedDataset& data, const SplitAssignment& assignment) {
    fs::create_directories(dir);
    const auto samples = apply_split(data.samples, assignment);
    {
        std::ofstream out(dir / "samples.jsonl", std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + (dir / "samples.jsonl").string());
        for (const auto& s : samples) {
            out << json{{"id", s.id},
                        {"text", s.text},
                        {"label", s.gold_label.name()},
                        {"split", std::string(to_string(s.split))},
                        {"dataset", s.dataset_id}}
                       .dump()
                << '\n';
        }
    }
    json labels = json::array();
    for (const auto& l : data.labels) labels.push_back(l.name());
    const auto sizes = assignment.sizes();
    json dist = json::object();
    for (const auto& [split, counts] : label_distribution(samples)) dist[std::string(to_string(split))] = counts;
    json meta{{"dataset", data.spec.dataset_id},
              {"labels", labels},
              {"seed", assignment.seed},
              {"sizes", {{"train", sizes.train}, {"dev", sizes.dev}, {"test", sizes.test}}},
              {"label_distribution", dist},
              {"warnings", data.warnings}};
    std::ofstream out(dir / "dataset.json", std::ios::binary | std::ios::trunc);
    out << meta.dump(2) << '\n';
}

CanonicalDataset read_canonical(const fs::path& dir) {
    CanonicalDataset out;
    json meta;
    try {
        meta = json::parse(read_file(dir / "dataset.json"));
        out.dataset_id = meta.at("dataset").get<std::string>();
        std::vector<FallacyLabel> labels;
        for (const auto& l : meta.at("labels")) labels.emplace_back(l.get<std::string>());
        out.labels = LabelSet(out.dataset_id, std::move(labels));
        if (meta.contains("seed")) out.seed = meta["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw SchemaError((dir / "dataset.json").string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError((dir / "dataset.json").string() + ": " + e.what());
    }

    std::size_t line_no = 0;
    for (const auto& line : text::split(read_file(dir / "samples.jsonl"), '\n')) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto where = (dir / "samples.jsonl").string() + ":" + std::to_string(line_no);
        try {
            auto j = json::parse(line);
            auto split = parse_split(j.at("split").get<std::string>());
            if (!split) throw SchemaError(where + ": unknown split");
            const auto name = j.at("label").get<std::string>();
            auto label = out.labels.find(name);
            if (!label) throw UnknownLabel(where + ": label '" + name + "' is not in the label set");
            out.samples.push_back(
                make_sample(j.at("id").get<std::string>(), j.at("text").get<std::string>(), *label, out.labels, *split));
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace fallacy::datasets
