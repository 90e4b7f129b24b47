#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fallacy/core_types.hpp"

namespace fallacy::prompts {

enum class Family { AugmentOurs, AugmentPrior, QueryGen, ClassifyWithQuery, ClassifyRanked, ZeroShot, ZCoT, DEF };

std::string_view to_string(Family family);

enum class AugmentFamily { Ours, Prior };
enum class Baseline { ZeroShot, ZCoT, DEF };

using Bindings = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::string text;
    Family family;
    /// Placeholder name (without braces) to substituted value.
    Bindings provenance;

    /// SHA-256 of `text`.
    std::string digest() const;
};

/// Template text with `{NAME}` placeholders (NAME in [A-Z_]+). Substitution is
/// single-pass: substituted values are never rescanned, so sample text that
/// happens to contain "{TEXT}" comes through verbatim.
class PromptTemplate {
public:
    PromptTemplate(Family family, std::optional<AugmentationKind> kind, std::string body);

    /// The wording shipped in data/templates/.
    static PromptTemplate builtin(Family family, std::optional<AugmentationKind> kind = std::nullopt);

    Family family() const noexcept { return family_; }
    std::optional<AugmentationKind> kind() const noexcept { return kind_; }
    const std::string& body() const noexcept { return body_; }

    /// Distinct placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;

    /// Throws TemplateError if a placeholder in the body has no binding.
    RenderedPrompt render(const Bindings& bindings) const;

    /// Copy of this template with every line containing `marker` removed.
    PromptTemplate without_line_containing(std::string_view marker) const;

private:
    Family family_;
    std::optional<AugmentationKind> kind_;
    std::string body_;
};

/// "A, B, C"
std::string comma_list(const std::vector<FallacyLabel>& labels);
/// "'A', 'B', and 'C'" with the given conjunction ("and" / "or").
std::string quoted_list(const std::vector<FallacyLabel>& labels, std::string_view conjunction);

/// Label name to definition text. Lookup ignores case.
class Definitions {
public:
    Definitions() = default;
    explicit Definitions(std::map<std::string, std::string> by_name);
    /// Parses "label<TAB>definition" lines; blank lines and '#' comments skipped.
    static Definitions parse_tsv(std::string_view tsv);
    /// Shipped definitions for a dataset, if any (ARGOTARIO).
    static std::optional<Definitions> builtin(std::string_view dataset_id);

    std::optional<std::string> find(const FallacyLabel& label) const;
    std::size_t size() const noexcept { return by_name_.size(); }

private:
    std::map<std::string, std::string> by_name_;  // lower-cased keys
};

RenderedPrompt build_augmentation_prompt(const Sample& sample, AugmentationKind kind, const LabelSet& labels,
                                         AugmentFamily family);

RenderedPrompt build_query_prompt(const Sample& sample, AugmentationKind kind, std::string_view augmentation);

RenderedPrompt build_classification_prompt(const Sample& sample, std::string_view query, const LabelSet& labels,
                                           bool concise);

/// Query texts for the ranked prompt plus the order to announce. Without an
/// `order` the "Ranking Information:" line is left out.
struct RankingInput {
    std::map<AugmentationKind, std::string> queries;
    std::optional<std::vector<AugmentationKind>> order;
};

/// "Explanation Query, Goal Query, Counterargument Query"
std::string ranking_line(const std::vector<AugmentationKind>& order);

/// Throws RankingIncomplete unless there is one query per kind and `order`
/// (when present) is a permutation of the three kinds.
RenderedPrompt build_ranked_prompt(const Sample& sample, const RankingInput& input, const LabelSet& labels);

/// DEF needs a definition for every label except No-Fallacy and throws
/// MissingDefinition otherwise.
RenderedPrompt build_baseline_prompt(const Sample& sample, const LabelSet& labels, Baseline mode,
                                     const Definitions* definitions = nullptr);

}  // namespace fallacy::prompts
