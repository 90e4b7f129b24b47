#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fallacy/eval.hpp"
#include "fallacy/pipeline.hpp"

namespace fallacy::ablation {

using pipeline::RankingVariant;

inline const std::vector<std::uint64_t> kDefaultSeeds{0, 1, 2, 3, 4};
inline const std::vector<double> kDefaultRatios{0.0, 0.25, 0.5, 0.75, 1.0};

/// Step 4 again over a stored ranked set, with no regeneration. Full gives
/// the same request as classify_final. The trail holds the new call only.
pipeline::Prediction classify_ranked_variant(const pipeline::Engine& engine, const Sample& x,
                                             const pipeline::RankedQuerySet& qs, const RankingVariant& variant,
                                             const LabelSet& labels);

/// Predictions of a stored run keyed by sample id.
using StoredRun = std::map<std::string, pipeline::Prediction>;
StoredRun index_run(const std::vector<pipeline::Prediction>& predictions);

struct VariantResult {
    RankingVariant variant;
    std::vector<pipeline::Prediction> predictions;
    eval::EvalReport report;
};

/// Re-classifies every sample under `variant`, reusing its stored ranked
/// set. Throws DataError when a sample has no stored ranked set.
VariantResult run_variant(const pipeline::Engine& engine, const std::vector<Sample>& samples, const StoredRun& stored,
                          const RankingVariant& variant, const LabelSet& labels, std::size_t workers = 1);

struct Averaged {
    std::vector<std::uint64_t> seeds;
    std::vector<eval::EvalReport> per_seed;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_macro_f1 = 0.0;
    double std_macro_f1 = 0.0;
};

/// Mean and population standard deviation of accuracy and macro-F1.
Averaged average_reports(std::vector<eval::EvalReport> reports, std::vector<std::uint64_t> seeds);

/// One Random run per seed. Throws std::invalid_argument for no seeds.
Averaged run_random_averaged(const pipeline::Engine& engine, const std::vector<Sample>& samples,
                             const StoredRun& stored, const LabelSet& labels,
                             const std::vector<std::uint64_t>& seeds = kDefaultSeeds, std::size_t workers = 1);

/// Substitution candidates for a word, nearest first.
class NeighborSource {
public:
    virtual ~NeighborSource() = default;
    virtual std::vector<std::string> neighbors(std::string_view word) const = 0;
    virtual std::string id() const = 0;
};

/// "word<TAB>neighbor1,neighbor2,..." lines. Lookup ignores case.
class TableNeighborSource final : public NeighborSource {
public:
    TableNeighborSource(std::string id, std::map<std::string, std::vector<std::string>> table);
    static TableNeighborSource parse(std::string_view tsv, std::string id = "table");
    /// Throws NeighborSourceUnavailable when the file cannot be read.
    static TableNeighborSource from_file(const std::filesystem::path& path);

    std::vector<std::string> neighbors(std::string_view word) const override;
    std::string id() const override { return id_; }
    std::size_t size() const noexcept { return table_.size(); }

private:
    std::string id_;
    std::map<std::string, std::vector<std::string>> table_;
};

/// Bundled English stopword list, lower-cased.
const std::set<std::string>& stopwords();

/// Non-stopword tokens made of letters (digits and punctuation excluded).
bool is_content_word(std::string_view token);

struct PerturbationPlan {
    double change_ratio = 0.0;
    std::string neighbor_source;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless 0 <= change_ratio <= 1.
    void validate() const;
};

struct Perturbed {
    pipeline::ReformulatedQuery query;
    std::size_t content_words = 0;
    /// ceil(change_ratio * content_words).
    std::size_t target = 0;
    std::size_t replaced = 0;

    std::size_t shortfall() const noexcept { return target - replaced; }
};

/// Replaces randomly chosen content-word occurrences by their nearest
/// neighbor until `target` are replaced or candidates run out. The draw is
/// seeded by the plan seed and the query's sample and kind. Throws
/// NeighborSourceUnavailable when `source` is null.
Perturbed perturb_query(const pipeline::ReformulatedQuery& q, const PerturbationPlan& plan,
                        const NeighborSource* source);

struct DiverseDraw {
    std::vector<Sample> samples;
    std::size_t chosen_draw = 0;
    /// Distinct gold labels of each draw.
    std::vector<std::size_t> unique_per_draw;
};

/// `draws` seeded random subsets of `size` samples; keeps the one with the
/// most distinct gold labels, earliest on ties.
DiverseDraw draw_diverse_subset(const std::vector<Sample>& pool, std::size_t size = 100, std::size_t draws = 5,
                                std::uint64_t seed = 0);

struct PerturbationPoint {
    AugmentationKind kind;
    double ratio = 0.0;
    eval::EvalReport report;
    std::size_t shortfall = 0;
};

/// Step 3 with perturbed queries, per kind and ratio. Samples may come from
/// several datasets; each is classified over its own label set.
std::vector<PerturbationPoint> run_perturbation(const pipeline::Engine& engine, const std::vector<Sample>& samples,
                                                const StoredRun& stored,
                                                const std::map<std::string, LabelSet>& label_sets,
                                                const NeighborSource& source, const std::vector<double>& ratios,
                                                std::uint64_t seed, std::size_t workers = 1);

/// Long-format CSV: dataset, experiment, setting, kind, seed, accuracy,
/// macro_f1.
std::string csv_header();
std::string csv_row(const std::string& dataset, const std::string& experiment, const std::string& setting,
                    const std::string& kind, const std::optional<std::uint64_t>& seed, const eval::EvalReport& r);

}  // namespace fallacy::ablation
