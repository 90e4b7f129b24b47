#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fallacy {

/// Canonical name of one fallacy class, e.g. "Faulty Generalization".
/// Never empty and never padded with whitespace.
class FallacyLabel {
public:
    explicit FallacyLabel(std::string name);

    const std::string& name() const noexcept { return name_; }

    friend bool operator==(const FallacyLabel&, const FallacyLabel&) = default;
    friend auto operator<=>(const FallacyLabel&, const FallacyLabel&) = default;

private:
    std::string name_;
};

/// A model output that did not resolve to exactly one label.
using LabelMatch = std::optional<FallacyLabel>;

/// Ordered label inventory of one dataset. Names are unique ignoring case.
class LabelSet {
public:
    LabelSet() = default;
    LabelSet(std::string dataset_id, std::vector<FallacyLabel> labels);

    const std::string& dataset_id() const noexcept { return dataset_id_; }
    const std::vector<FallacyLabel>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    auto begin() const noexcept { return labels_.begin(); }
    auto end() const noexcept { return labels_.end(); }
    const FallacyLabel& operator[](std::size_t i) const { return labels_.at(i); }

    bool contains(const FallacyLabel& label) const;
    /// Case-insensitive lookup by name.
    std::optional<FallacyLabel> find(std::string_view name) const;
    std::optional<std::size_t> index_of(const FallacyLabel& label) const;

    /// Labels other than the No-Fallacy class, in order.
    std::vector<FallacyLabel> fallacies_only() const;

private:
    std::string dataset_id_;
    std::vector<FallacyLabel> labels_;
};

/// True for the "No Fallacy" class under any common spelling.
bool is_no_fallacy(const FallacyLabel& label);

enum class Split { Train, Dev, Test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct Sample {
    std::string id;
    std::string text;
    FallacyLabel gold_label;
    std::string dataset_id;
    Split split = Split::Test;
};

/// Validates the sample invariants against its dataset's label set.
Sample make_sample(std::string id, std::string text, FallacyLabel gold, const LabelSet& labels,
                   Split split);

/// Index i = 1, 2, 3 of the augmentation instruction.
enum class AugmentationKind { Counterargument = 1, Explanation = 2, Goal = 3 };

inline constexpr std::array<AugmentationKind, 3> kAllKinds{
    AugmentationKind::Counterargument, AugmentationKind::Explanation, AugmentationKind::Goal};

constexpr int kind_index(AugmentationKind kind) { return static_cast<int>(kind); }
/// "CG", "EX" or "GO".
std::string_view short_name(AugmentationKind kind);
/// "Counterargument", "Explanation" or "Goal".
std::string_view display_name(AugmentationKind kind);
/// Accepts short or display names, any case.
std::optional<AugmentationKind> parse_kind(std::string_view text);

/// Resolves a raw model output to a label of `labels`.
///
/// Exact match after trimming, case folding and stripping surrounding quotes
/// and periods wins. Otherwise the label is returned only if it is the single
/// label whose name occurs in `raw` as a whole phrase.
LabelMatch canonicalize_label(std::string_view raw, const LabelSet& labels);

/// How `canonicalize_label` resolved its input, for confidence extraction.
enum class MatchKind { Exact, Phrase, None };
struct LabelResolution {
    LabelMatch label;
    MatchKind kind = MatchKind::None;
    /// Every label whose name occurs as a whole phrase in the input.
    std::vector<FallacyLabel> mentioned;
};
LabelResolution resolve_label(std::string_view raw, const LabelSet& labels);

}  // namespace fallacy
