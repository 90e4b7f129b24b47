#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/core_types.hpp"
#include "fallacy/pipeline.hpp"

namespace fallacy::eval {

/// Counts per (gold, predicted) pair; a NoMatch prediction has its own
/// column (predicted = nullopt).
class ConfusionMatrix {
public:
    using Column = std::optional<std::string>;

    void add(const FallacyLabel& gold, const LabelMatch& predicted, std::uint64_t n = 1);
    std::uint64_t at(const std::string& gold, const Column& predicted) const;
    std::uint64_t total() const noexcept { return total_; }
    const std::map<std::string, std::map<Column, std::uint64_t>>& rows() const noexcept { return rows_; }

    std::uint64_t true_positives(const std::string& label) const;
    /// Row sum.
    std::uint64_t support(const std::string& label) const;
    /// Column sum.
    std::uint64_t predicted_count(const Column& label) const;
    std::uint64_t correct() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::map<std::string, std::map<Column, std::uint64_t>> rows_;
    std::uint64_t total_ = 0;
};

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct EvalReport {
    std::string dataset_id;
    std::string mode;
    double accuracy = 0.0;
    /// Unweighted mean F1 over the classes present in gold.
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    /// Same average with the No-Fallacy class left out; nullopt when the
    /// gold has no such class.
    std::optional<double> macro_f1_without_no_fallacy;
    std::vector<ClassMetrics> per_class;
    double no_match_rate = 0.0;
    std::optional<std::uint64_t> split_seed;
    std::size_t samples = 0;
    std::size_t degraded = 0;
    ConfusionMatrix confusion;
};

/// sample id to gold label.
using GoldMap = std::map<std::string, FallacyLabel>;

GoldMap gold_map(const std::vector<Sample>& samples);

/// Metrics straight from a confusion matrix. Per-class rows follow
/// `labels` order and cover the classes that occur in gold or predictions.
EvalReport report_from(const ConfusionMatrix& cm, const LabelSet& labels);

/// Throws MissingGold when a prediction's sample has no gold label.
EvalReport score(const std::vector<pipeline::Prediction>& predictions, const GoldMap& gold, const LabelSet& labels,
                 std::optional<std::uint64_t> split_seed = std::nullopt);

/// One prediction reduced to what the confidence analyses need.
struct ScoredItem {
    std::string sample_id;
    LabelMatch predicted;
    std::optional<double> confidence;
};

/// Final labels and confidences of the predictions.
std::vector<ScoredItem> final_items(const std::vector<pipeline::Prediction>& predictions);
/// Per-query (step 3) labels and confidences for one kind, from ranked sets
/// or single-query runs of that kind.
std::vector<ScoredItem> query_items(const std::vector<pipeline::Prediction>& predictions, AugmentationKind kind);

/// exp(logprob) clamped to [0, 1].
double to_probability(double logprob);

struct ConfidenceBand {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    /// nullopt for an empty band.
    std::optional<double> micro_f1;
};

struct BandReport {
    std::vector<ConfidenceBand> bands;
    /// Items without a confidence, left out of every band.
    std::size_t absent = 0;
};

/// Bands are [e_i, e_{i+1}), the last one closed. Edges must be increasing
/// within [0, 1]; throws std::invalid_argument otherwise.
BandReport f1_by_confidence(const std::vector<ScoredItem>& items, const GoldMap& gold,
                            const std::vector<double>& band_edges);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double empirical_accuracy = 0.0;
};

struct Reliability {
    std::vector<CalibrationBin> bins;
    double ece = 0.0;
    std::size_t scored = 0;
    std::size_t absent = 0;
};

/// Index of the equal-width bin holding probability p: k with
/// k/n <= p < (k+1)/n, and 1.0 in the last bin.
std::size_t bin_index(double p, std::size_t n_bins);

Reliability reliability(const std::vector<ScoredItem>& items, const GoldMap& gold, std::size_t n_bins = 10);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const BandReport& r);
nlohmann::json to_json(const Reliability& r);

/// Flat row per dataset and mode.
std::string csv_header();
std::string csv_row(const EvalReport& r);
std::string bins_csv(const Reliability& r);

}  // namespace fallacy::eval
