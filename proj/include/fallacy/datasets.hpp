#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/core_types.hpp"

namespace fallacy::datasets {

struct DatasetSpec {
    std::string dataset_id;
    std::size_t expected_n = 0;
    /// Class count after merging.
    std::size_t expected_c = 0;
    bool has_predefined_test = false;
    bool includes_no_fallacy = false;
};

/// PROPAGANDA, ARGOTARIO, LOGIC, COVID-19, CLIMATE.
const std::vector<DatasetSpec>& registry();
/// Case-insensitive; throws ConfigError for unknown ids.
const DatasetSpec& spec_for(std::string_view dataset_id);

/// Folds the merge groups onto one name (e.g. "Post Hoc" -> "False
/// Causality"). Other labels pass through with whitespace collapsed.
std::string merge_labels(std::string_view raw);
/// Every source name that merge_labels rewrites to something else.
std::vector<std::string> merge_source_names();

enum class SourceFormat { Csv, Tsv, Jsonl };

struct SourceFile {
    std::string path;
    /// Rows of this file belong to a predefined split.
    std::optional<Split> split;
};

/// How a corpus is laid out on disk. Shipped defaults live in
/// data/datasets/<ID>.layout.json and can be replaced by a user file.
struct SourceLayout {
    std::string dataset_id;
    SourceFormat format = SourceFormat::Csv;
    std::vector<SourceFile> files;
    std::string text_column;
    /// Question/answer corpora: joined as "Q: <question> A: <answer>".
    std::string question_column;
    std::string answer_column;
    std::string label_column;
    std::string id_column;
    /// Lower-cased raw label to canonical label, applied after merging.
    std::map<std::string, std::string> label_aliases;
    /// Known inventory in print order. When empty the inventory is taken from
    /// the data.
    std::vector<std::string> labels;

    static SourceLayout builtin(std::string_view dataset_id);
    static SourceLayout from_json(const nlohmann::json& j);
    static SourceLayout from_file(const std::filesystem::path& path);
};

/// CountMismatch either warns or fails.
enum class Strictness { Warn, Fail };

struct LoadedDataset {
    DatasetSpec spec;
    std::vector<Sample> samples;
    LabelSet labels;
    /// Ids of samples that came from a predefined test file.
    std::set<std::string> predefined_test;
    std::vector<std::string> warnings;
};

/// Reads a corpus through its layout. Throws SchemaError for missing
/// columns, UnknownLabel for labels outside a known inventory and, under
/// Strictness::Fail, CountMismatch when N or C differ from the spec.
LoadedDataset load_dataset(const DatasetSpec& spec, const std::filesystem::path& dir,
                           Strictness strictness = Strictness::Warn,
                           const std::optional<SourceLayout>& layout = std::nullopt);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;

    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

/// 65/15/20 by largest remainder: each part gets floor(n * p), the leftover
/// samples go to the largest fractional parts, ties in train, dev, test order.
SplitSizes split_sizes(std::size_t n);
/// Same rule for train/dev only, 65:15.
SplitSizes train_dev_sizes(std::size_t n);

struct SplitAssignment {
    std::map<std::string, Split> by_id;
    std::uint64_t seed = 0;

    SplitSizes sizes() const;
};

/// Seeded shuffle then cut. With a predefined test set those samples are
/// test and the rest is cut 65:15 into train/dev.
SplitAssignment split_dataset(const LoadedDataset& data, std::uint64_t seed);

/// Copies of the samples with their split set from the assignment.
std::vector<Sample> apply_split(const std::vector<Sample>& samples, const SplitAssignment& assignment);

/// Per split, per gold label counts.
std::map<Split, std::map<std::string, std::size_t>> label_distribution(const std::vector<Sample>& samples);

/// Canonical corpus on disk: samples.jsonl with one {id, text, label, split,
/// dataset} record per line, and dataset.json holding the label set, seed and
/// split sizes.
struct CanonicalDataset {
    std::string dataset_id;
    LabelSet labels;
    std::vector<Sample> samples;
    std::optional<std::uint64_t> seed;
};

void write_canonical(const std::filesystem::path& dir, const LoadedDataset& data, const SplitAssignment& assignment);
/// Throws SchemaError or UnknownLabel on a malformed directory.
CanonicalDataset read_canonical(const std::filesystem::path& dir);

}  // namespace fallacy::datasets
