#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/core_types.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/llm/backend.hpp"
#include "fallacy/prompts.hpp"

namespace fallacy::pipeline {

/// One backend call made on behalf of a sample.
struct TrailEntry {
    /// e.g. "augment:CG", "query:EX", "classify:GO", "final", "baseline".
    std::string step;
    /// SHA-256 of the rendered prompt text.
    std::string prompt_digest;
    /// Cache key of the request, resolvable against the response cache.
    std::string request_key;
    std::string response_digest;

    friend bool operator==(const TrailEntry&, const TrailEntry&) = default;
};

using Trail = std::vector<TrailEntry>;

struct Augmentation {
    std::string sample_id;
    AugmentationKind kind;
    std::string text;
    /// Cache key of the generating request.
    std::string prompt_digest;

    friend bool operator==(const Augmentation&, const Augmentation&) = default;
};

class ReformulatedQuery {
public:
    /// Throws std::invalid_argument unless `kind` matches the source kind.
    ReformulatedQuery(std::string sample_id, AugmentationKind kind, std::string text, Augmentation source);

    const std::string& sample_id() const noexcept { return sample_id_; }
    AugmentationKind kind() const noexcept { return kind_; }
    const std::string& text() const noexcept { return text_; }
    const Augmentation& source_augmentation() const noexcept { return source_; }

    friend bool operator==(const ReformulatedQuery&, const ReformulatedQuery&) = default;

private:
    std::string sample_id_;
    AugmentationKind kind_;
    std::string text_;
    Augmentation source_;
};

struct QueryClassification {
    ReformulatedQuery query;
    LabelMatch predicted;
    /// Sum of label-token logprobs (<= 0); nullopt when no label span could be
    /// scored, in which case the query ranks last.
    std::optional<double> confidence;
    std::string response_digest;
    /// The provider returned no logprobs for this call.
    bool degraded = false;

    AugmentationKind kind() const noexcept { return query.kind(); }

    friend bool operator==(const QueryClassification&, const QueryClassification&) = default;
};

/// True when a ranks strictly before b: higher confidence first, absent last,
/// ties by kind (CG < EX < GO).
bool ranks_before(const QueryClassification& a, const QueryClassification& b);

class RankedQuerySet {
public:
    /// Exactly one classification per kind, in any order. The order is
    /// recomputed and must match `order` when one is given.
    explicit RankedQuerySet(std::vector<QueryClassification> classifications,
                            std::optional<std::vector<AugmentationKind>> order = std::nullopt);

    const std::vector<AugmentationKind>& order() const noexcept { return order_; }
    const QueryClassification& at(AugmentationKind kind) const;
    /// Classifications in CG, EX, GO order.
    const std::vector<QueryClassification>& by_kind() const noexcept { return by_kind_; }

    /// Query texts keyed by kind, with the confidence order announced.
    prompts::RankingInput ranking_input() const;

    friend bool operator==(const RankedQuerySet&, const RankedQuerySet&) = default;

private:
    std::vector<QueryClassification> by_kind_;
    std::vector<AugmentationKind> order_;
};

RankedQuerySet rank_queries(std::vector<QueryClassification> classifications);

/// What the final prompt is told about the ranking.
struct RankingVariant {
    enum class Kind { Full, None, Random };
    Kind kind = Kind::Full;
    std::uint64_t seed = 0;

    static RankingVariant full() { return {Kind::Full, 0}; }
    static RankingVariant none() { return {Kind::None, 0}; }
    static RankingVariant random(std::uint64_t seed) { return {Kind::Random, seed}; }

    /// "full", "none" or "random:<seed>".
    std::string to_string() const;
    static RankingVariant parse(std::string_view text);

    friend bool operator==(const RankingVariant&, const RankingVariant&) = default;
};

/// Order announced by the Random variant for one sample. Seeded from the run
/// seed and the sample id, so results do not depend on processing order.
std::vector<AugmentationKind> random_order(std::uint64_t seed, std::string_view sample_id);

struct Mode {
    enum class Kind { PromptRanking, SingleQuery, ZeroShot, ZCoT, DEF, RankedNone, RankedRandom };
    Kind kind = Kind::PromptRanking;
    /// SingleQuery only.
    AugmentationKind query_kind = AugmentationKind::Counterargument;
    /// RankedRandom only.
    std::uint64_t seed = 0;

    static Mode prompt_ranking() { return {}; }
    static Mode single_query(AugmentationKind kind) { return {Kind::SingleQuery, kind, 0}; }
    static Mode baseline(prompts::Baseline b);
    static Mode ranked_none() { return {Kind::RankedNone, AugmentationKind::Counterargument, 0}; }
    static Mode ranked_random(std::uint64_t seed) { return {Kind::RankedRandom, AugmentationKind::Counterargument, seed}; }

    bool is_baseline() const noexcept { return kind == Kind::ZeroShot || kind == Kind::ZCoT || kind == Kind::DEF; }
    bool uses_ranking() const noexcept {
        return kind == Kind::PromptRanking || kind == Kind::RankedNone || kind == Kind::RankedRandom;
    }

    /// "prompt-ranking", "single-query:EX", "zero-shot", "zcot", "def",
    /// "ranked-none", "ranked-random:<seed>".
    std::string to_string() const;
    /// Throws ConfigError on unknown text.
    static Mode parse(std::string_view text);

    friend bool operator==(const Mode&, const Mode&) = default;
};

class Prediction {
public:
    /// Throws std::invalid_argument on an empty trail, or when a ranking mode
    /// has no ranked set, or SingleQuery has no single classification.
    Prediction(std::string sample_id, std::string dataset_id, Mode mode, LabelMatch label,
               std::optional<double> confidence, std::optional<RankedQuerySet> ranked,
               std::optional<QueryClassification> single, Trail trail, bool degraded = false);

    const std::string& sample_id() const noexcept { return sample_id_; }
    const std::string& dataset_id() const noexcept { return dataset_id_; }
    const Mode& mode() const noexcept { return mode_; }
    const LabelMatch& label() const noexcept { return label_; }
    const std::optional<double>& confidence() const noexcept { return confidence_; }
    const std::optional<RankedQuerySet>& ranked() const noexcept { return ranked_; }
    const std::optional<QueryClassification>& single() const noexcept { return single_; }
    const Trail& trail() const noexcept { return trail_; }
    bool degraded() const noexcept { return degraded_; }

    friend bool operator==(const Prediction&, const Prediction&) = default;

private:
    std::string sample_id_;
    std::string dataset_id_;
    Mode mode_;
    LabelMatch label_;
    std::optional<double> confidence_;
    std::optional<RankedQuerySet> ranked_;
    std::optional<QueryClassification> single_;
    Trail trail_;
    bool degraded_;
};

nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

/// Label scored out of one classification response.
struct LabelScore {
    LabelMatch label;
    std::optional<double> confidence;
    bool degraded = false;
};

/// Exact match: the whole response's logprobs. Phrase match: the label's
/// token span. No match: the best span among mentioned labels, else absent.
LabelScore score_response(const llm::GenerationResponse& response, const LabelSet& labels);

enum class ArgmaxStrategy { Greedy, PerLabel };

struct GenerationParams {
    int max_tokens;
    double temperature;
};

struct EngineConfig {
    std::string generator_model = "gpt-3.5-turbo-instruct";
    std::string classifier_model = "gpt-3.5-turbo";
    GenerationParams generation{256, 0.0};
    GenerationParams classification{16, 0.0};
    /// ZCoT lets the model reason before naming the label.
    GenerationParams reasoning{256, 0.0};
    prompts::AugmentFamily augment_family = prompts::AugmentFamily::Ours;
    bool concise = true;
    ArgmaxStrategy argmax = ArgmaxStrategy::Greedy;
    /// Run the CG/EX/GO chains of one sample concurrently.
    bool parallel_chains = false;
    std::optional<prompts::Definitions> definitions;
};

/// A failure inside run_pipeline, naming the step that failed. The original
/// exception is kept in `cause`.
struct StepFailure : Error {
    StepFailure(std::string step, const std::string& message, std::exception_ptr cause)
        : Error("step " + step + ": " + message), step(std::move(step)), cause(std::move(cause)) {}
    std::string step;
    std::exception_ptr cause;
};

class Engine {
public:
    Engine(llm::BackendPtr backend, EngineConfig config);

    const EngineConfig& config() const noexcept { return config_; }

    /// Throws EmptyGeneration when the trimmed completion is empty.
    Augmentation generate_augmentation(const Sample& x, AugmentationKind kind, const LabelSet& labels,
                                       Trail* trail = nullptr) const;
    ReformulatedQuery generate_query(const Sample& x, const Augmentation& aug, Trail* trail = nullptr) const;
    QueryClassification classify_with_query(const Sample& x, const ReformulatedQuery& q, const LabelSet& labels,
                                            Trail* trail = nullptr) const;
    /// Steps 1 to 3 for one kind.
    QueryClassification run_chain(const Sample& x, AugmentationKind kind, const LabelSet& labels,
                                  Trail* trail = nullptr) const;

    /// Builds the ranked prompt for a variant of the announced order.
    prompts::RenderedPrompt ranked_prompt(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                                          const RankingVariant& variant) const;
    /// Step 4 under a ranking variant. Returns the label and its confidence.
    LabelScore classify_ranked(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                               const RankingVariant& variant, Trail* trail = nullptr) const;
    Prediction classify_final(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                              Trail prior_trail = {}) const;

    Prediction run_baseline(const Sample& x, const LabelSet& labels, prompts::Baseline baseline) const;
    Prediction run_pipeline(const Sample& x, const LabelSet& labels, const Mode& mode) const;

private:
    struct Call {
        llm::GenerationResponse response;
        std::string key;
        bool degraded = false;
    };
    Call call(const std::string& step, const prompts::RenderedPrompt& prompt, const std::string& model,
              const GenerationParams& params, bool want_logprobs, Trail* trail) const;
    LabelScore score_per_label(const std::string& step, const prompts::RenderedPrompt& prompt, const LabelSet& labels,
                               Trail* trail) const;

    llm::BackendPtr backend_;
    EngineConfig config_;
};

}  // namespace fallacy::pipeline
