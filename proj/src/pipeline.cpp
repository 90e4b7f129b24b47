#include "fallacy/pipeline.hpp"

#include <algorithm>
#include <future>

#include "fallacy/llm/sha256.hpp"
#include "fallacy/random.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::pipeline {

using nlohmann::json;

ReformulatedQuery::ReformulatedQuery(std::string sample_id, AugmentationKind kind, std::string text,
                                     Augmentation source)
    : sample_id_(std::move(sample_id)), kind_(kind), text_(std::move(text)), source_(std::move(source)) {
    if (kind_ != source_.kind) {
        throw std::invalid_argument("query kind " + std::string(short_name(kind_)) + " does not match augmentation kind " +
                                    std::string(short_name(source_.kind)));
    }
}

bool ranks_before(const QueryClassification& a, const QueryClassification& b) {
    if (a.confidence && b.confidence && *a.confidence != *b.confidence) return *a.confidence > *b.confidence;
    if (a.confidence.has_value() != b.confidence.has_value()) return a.confidence.has_value();
    return kind_index(a.kind()) < kind_index(b.kind());
}

RankedQuerySet::RankedQuerySet(std::vector<QueryClassification> classifications,
                               std::optional<std::vector<AugmentationKind>> order) {
    if (classifications.size() != kAllKinds.size()) {
        throw std::invalid_argument("ranked set needs exactly one classification per kind");
    }
    std::sort(classifications.begin(), classifications.end(),
              [](const auto& a, const auto& b) { return kind_index(a.kind()) < kind_index(b.kind()); });
    for (std::size_t i = 0; i < kAllKinds.size(); ++i) {
        if (classifications[i].kind() != kAllKinds[i]) {
            throw std::invalid_argument("ranked set needs exactly one classification per kind");
        }
    }
    by_kind_ = std::move(classifications);

    std::vector<const QueryClassification*> sorted;
    for (const auto& c : by_kind_) sorted.push_back(&c);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return ranks_before(*a, *b); });
    for (auto* c : sorted) order_.push_back(c->kind());
    if (order && *order != order_) throw std::invalid_argument("stored ranking order disagrees with confidences");
}

const QueryClassification& RankedQuerySet::at(AugmentationKind kind) const {
    return by_kind_.at(static_cast<std::size_t>(kind_index(kind) - 1));
}

prompts::RankingInput RankedQuerySet::ranking_input() const {
    prompts::RankingInput in;
    for (const auto& c : by_kind_) in.queries[c.kind()] = c.query.text();
    in.order = order_;
    return in;
}

RankedQuerySet rank_queries(std::vector<QueryClassification> classifications) {
    return RankedQuerySet(std::move(classifications));
}

std::string RankingVariant::to_string() const {
    switch (kind) {
        case Kind::Full: return "full";
        case Kind::None: return "none";
        case Kind::Random: return "random:" + std::to_string(seed);
    }
    return "full";
}

namespace {

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    if (s.empty() || s.size() > 20) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

}  // namespace

RankingVariant RankingVariant::parse(std::string_view text) {
    auto t = text::to_lower(text::trim(text));
    if (t == "full") return full();
    if (t == "none") return none();
    if (t == "random") return random(0);
    if (t.rfind("random:", 0) == 0) {
        if (auto seed = parse_u64(std::string_view(t).substr(7))) return random(*seed);
    }
    throw ConfigError("unknown ranking variant '" + std::string(text) + "' (expected full, none or random:<seed>)");
}

std::vector<AugmentationKind> random_order(std::uint64_t seed, std::string_view sample_id) {
    std::vector<AugmentationKind> order(kAllKinds.begin(), kAllKinds.end());
    Rng rng(mix_seed(seed, sample_id));
    rng.shuffle(order);
    return order;
}

Mode Mode::baseline(prompts::Baseline b) {
    switch (b) {
        case prompts::Baseline::ZeroShot: return {Kind::ZeroShot, AugmentationKind::Counterargument, 0};
        case prompts::Baseline::ZCoT: return {Kind::ZCoT, AugmentationKind::Counterargument, 0};
        case prompts::Baseline::DEF: return {Kind::DEF, AugmentationKind::Counterargument, 0};
    }
    throw std::invalid_argument("unknown baseline");
}

std::string Mode::to_string() const {
    switch (kind) {
        case Kind::PromptRanking: return "prompt-ranking";
        case Kind::SingleQuery: return "single-query:" + std::string(short_name(query_kind));
        case Kind::ZeroShot: return "zero-shot";
        case Kind::ZCoT: return "zcot";
        case Kind::DEF: return "def";
        case Kind::RankedNone: return "ranked-none";
        case Kind::RankedRandom: return "ranked-random:" + std::to_string(seed);
    }
    return "prompt-ranking";
}

Mode Mode::parse(std::string_view text) {
    const auto t = text::to_lower(text::trim(text));
    if (t == "prompt-ranking" || t == "ours") return prompt_ranking();
    if (t == "zero-shot") return baseline(prompts::Baseline::ZeroShot);
    if (t == "zcot") return baseline(prompts::Baseline::ZCoT);
    if (t == "def") return baseline(prompts::Baseline::DEF);
    if (t == "ranked-none") return ranked_none();
    if (t.rfind("single-query:", 0) == 0) {
        if (auto kind = parse_kind(std::string_view(t).substr(13))) return single_query(*kind);
    }
    if (t.rfind("ranked-random:", 0) == 0) {
        if (auto seed = parse_u64(std::string_view(t).substr(14))) return ranked_random(*seed);
    }
    throw ConfigError("unknown mode '" + std::string(text) +
                      "' (expected prompt-ranking, single-query:<CG|EX|GO>, zero-shot, zcot, def, ranked-none or "
                      "ranked-random:<seed>)");
}

Prediction::Prediction(std::string sample_id, std::string dataset_id, Mode mode, LabelMatch label,
                       std::optional<double> confidence, std::optional<RankedQuerySet> ranked,
                       std::optional<QueryClassification> single, Trail trail, bool degraded)
    : sample_id_(std::move(sample_id)),
      dataset_id_(std::move(dataset_id)),
      mode_(mode),
      label_(std::move(label)),
      confidence_(confidence),
      ranked_(std::move(ranked)),
      single_(std::move(single)),
      trail_(std::move(trail)),
      degraded_(degraded) {
    if (trail_.empty()) throw std::invalid_argument("prediction for " + sample_id_ + " has an empty trail");
    if (mode_.uses_ranking() && !ranked_) {
        throw std::invalid_argument("prediction for " + sample_id_ + " in mode " + mode_.to_string() +
                                    " has no ranked query set");
    }
    if (mode_.kind == Mode::Kind::SingleQuery && !single_) {
        throw std::invalid_argument("single-query prediction for " + sample_id_ + " has no classification");
    }
    if (confidence_ && *confidence_ > 0.0) throw std::invalid_argument("confidence must be <= 0");
}

namespace {

json opt_label(const LabelMatch& l) { return l ? json(l->name()) : json(nullptr); }
json opt_double(const std::optional<double>& d) { return d ? json(*d) : json(nullptr); }

LabelMatch label_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return FallacyLabel(j.get<std::string>());
}
std::optional<double> double_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json to_json(const QueryClassification& c) {
    const auto& aug = c.query.source_augmentation();
    return json{{"kind", std::string(short_name(c.kind()))},
                {"augmentation", json{{"text", aug.text}, {"prompt_digest", aug.prompt_digest}}},
                {"query", c.query.text()},
                {"predicted", opt_label(c.predicted)},
                {"confidence", opt_double(c.confidence)},
                {"response_digest", c.response_digest},
                {"degraded", c.degraded}};
}

QueryClassification classification_from_json(const json& j, const std::string& sample_id) {
    auto kind = parse_kind(j.at("kind").get<std::string>());
    if (!kind) throw SchemaError("unknown augmentation kind in run record");
    const auto& a = j.at("augmentation");
    Augmentation aug{sample_id, *kind, a.at("text").get<std::string>(), a.at("prompt_digest").get<std::string>()};
    ReformulatedQuery q(sample_id, *kind, j.at("query").get<std::string>(), std::move(aug));
    return QueryClassification{std::move(q), label_from(j.at("predicted")), double_from(j.at("confidence")),
                               j.at("response_digest").get<std::string>(), j.value("degraded", false)};
}

}  // namespace

json to_json(const Prediction& p) {
    json trail = json::array();
    for (const auto& t : p.trail()) {
        trail.push_back(json{{"step", t.step},
                             {"prompt_digest", t.prompt_digest},
                             {"request_key", t.request_key},
                             {"response_digest", t.response_digest}});
    }
    json j{{"sample_id", p.sample_id()},
           {"dataset_id", p.dataset_id()},
           {"mode", p.mode().to_string()},
           {"label", opt_label(p.label())},
           {"confidence", opt_double(p.confidence())},
           {"degraded", p.degraded()},
           {"trail", std::move(trail)}};
    if (p.ranked()) {
        json order = json::array();
        for (auto k : p.ranked()->order()) order.push_back(std::string(short_name(k)));
        json queries = json::array();
        for (const auto& c : p.ranked()->by_kind()) queries.push_back(to_json(c));
        j["ranked"] = json{{"order", std::move(order)}, {"queries", std::move(queries)}};
    }
    if (p.single()) j["single"] = to_json(*p.single());
    return j;
}

Prediction prediction_from_json(const json& j) {
    try {
        const auto sample_id = j.at("sample_id").get<std::string>();
        std::optional<RankedQuerySet> ranked;
        if (j.contains("ranked")) {
            std::vector<QueryClassification> cs;
            for (const auto& q : j["ranked"].at("queries")) cs.push_back(classification_from_json(q, sample_id));
            std::vector<AugmentationKind> order;
            for (const auto& k : j["ranked"].at("order")) {
                auto kind = parse_kind(k.get<std::string>());
                if (!kind) throw SchemaError("unknown kind in ranking order");
                order.push_back(*kind);
            }
            ranked.emplace(std::move(cs), std::move(order));
        }
        std::optional<QueryClassification> single;
        if (j.contains("single")) single = classification_from_json(j["single"], sample_id);
        Trail trail;
        for (const auto& t : j.at("trail")) {
            trail.push_back({t.at("step").get<std::string>(), t.at("prompt_digest").get<std::string>(),
                             t.at("request_key").get<std::string>(), t.at("response_digest").get<std::string>()});
        }
        return Prediction(sample_id, j.at("dataset_id").get<std::string>(), Mode::parse(j.at("mode").get<std::string>()),
                          label_from(j.at("label")), double_from(j.at("confidence")), std::move(ranked),
                          std::move(single), std::move(trail), j.value("degraded", false));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed run record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("invalid run record: ") + e.what());
    } catch (const ConfigError& e) {
        throw SchemaError(std::string("invalid run record: ") + e.what());
    }
}

namespace {

std::optional<double> try_span(const llm::GenerationResponse& r, const FallacyLabel& label) {
    try {
        return std::min(0.0, llm::sum_label_logprobs(r, label));
    } catch (const LabelSpanNotFound&) {
        return std::nullopt;
    }
}

}  // namespace

LabelScore score_response(const llm::GenerationResponse& response, const LabelSet& labels) {
    auto r = resolve_label(response.text, labels);
    LabelScore s{r.label, std::nullopt};
    if (response.tokens.empty()) return s;
    switch (r.kind) {
        case MatchKind::Exact: {
            double sum = 0.0;
            for (const auto& t : response.tokens) sum += t.logprob;
            s.confidence = std::min(0.0, sum);
            break;
        }
        case MatchKind::Phrase: s.confidence = try_span(response, *r.label); break;
        case MatchKind::None:
            for (const auto& m : r.mentioned) {
                auto c = try_span(response, m);
                if (c && (!s.confidence || *c > *s.confidence)) s.confidence = c;
            }
            break;
    }
    return s;
}

namespace {

// Reasoning output usually ends with the answer, so when several labels are
// named the one mentioned last is taken.
LabelScore score_reasoning(const llm::GenerationResponse& response, const LabelSet& labels) {
    auto s = score_response(response, labels);
    if (s.label) return s;
    const auto r = resolve_label(response.text, labels);
    if (r.mentioned.empty()) return s;
    const std::string joined = response.tokens.empty() ? response.text : response.joined_tokens();
    std::optional<FallacyLabel> best;
    std::size_t best_pos = 0;
    for (const auto& m : r.mentioned) {
        std::size_t last = std::string::npos;
        for (auto p = text::ifind(joined, m.name()); p != std::string::npos; p = text::ifind(joined, m.name(), p + 1)) {
            last = p;
        }
        if (last != std::string::npos && (!best || last > best_pos)) {
            best = m;
            best_pos = last;
        }
    }
    if (!best) return s;
    LabelScore out{best, std::nullopt};
    if (!response.tokens.empty()) {
        out.confidence = std::min(0.0, llm::sum_range_logprobs(response, best_pos, best->name().size()));
    }
    return out;
}

template <typename F>
auto at_step(const std::string& step, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StepFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StepFailure(step, e.what(), std::current_exception());
    }
}

std::string step_name(std::string_view prefix, AugmentationKind kind) {
    return std::string(prefix) + ":" + std::string(short_name(kind));
}

}  // namespace

Engine::Engine(llm::BackendPtr backend, EngineConfig config) : backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) throw std::invalid_argument("engine needs a backend");
}

Engine::Call Engine::call(const std::string& step, const prompts::RenderedPrompt& prompt, const std::string& model,
                          const GenerationParams& params, bool want_logprobs, Trail* trail) const {
    llm::GenerationRequest req;
    req.model_id = model;
    req.prompt = prompt.text;
    req.max_tokens = params.max_tokens;
    req.temperature = params.temperature;
    req.want_logprobs = want_logprobs;
    Call c;
    c.key = llm::CacheKey::of(req).hex();
    try {
        c.response = backend_->generate(req);
    } catch (const llm::LogprobsUnavailable& e) {
        c.response = e.partial;
        c.degraded = true;
    }
    if (trail) trail->push_back({step, prompt.digest(), c.key, llm::response_digest(c.response)});
    return c;
}

LabelScore Engine::score_per_label(const std::string& step, const prompts::RenderedPrompt& prompt,
                                   const LabelSet& labels, Trail* trail) const {
    LabelScore best{std::nullopt, std::nullopt};
    for (const auto& label : labels) {
        const std::string continuation = " " + label.name();
        llm::GenerationRequest req;
        req.model_id = config_.classifier_model;
        req.prompt = prompt.text + continuation;
        req.max_tokens = 1;
        req.temperature = 0.0;
        req.want_logprobs = true;
        req.echo = true;
        const auto key = llm::CacheKey::of(req).hex();
        const auto resp = backend_->generate(req);
        if (trail) {
            trail->push_back(
                {step + ":" + label.name(), llm::sha256_hex(req.prompt), key, llm::response_digest(resp)});
        }
        const double score = std::min(0.0, llm::sum_range_logprobs(resp, prompt.text.size(), continuation.size()));
        if (!best.confidence || score > *best.confidence) best = {label, score};
    }
    return best;
}

Augmentation Engine::generate_augmentation(const Sample& x, AugmentationKind kind, const LabelSet& labels,
                                           Trail* trail) const {
    const auto prompt = prompts::build_augmentation_prompt(x, kind, labels, config_.augment_family);
    auto c = call(step_name("augment", kind), prompt, config_.generator_model, config_.generation, false, trail);
    auto text = std::string(text::trim(c.response.text));
    if (text.empty()) {
        throw EmptyGeneration("empty " + std::string(display_name(kind)) + " augmentation for sample " + x.id);
    }
    return Augmentation{x.id, kind, std::move(text), c.key};
}

ReformulatedQuery Engine::generate_query(const Sample& x, const Augmentation& aug, Trail* trail) const {
    const auto prompt = prompts::build_query_prompt(x, aug.kind, aug.text);
    auto c = call(step_name("query", aug.kind), prompt, config_.generator_model, config_.generation, false, trail);
    auto text = std::string(text::trim(c.response.text));
    if (text.empty()) {
        throw EmptyGeneration("empty " + std::string(display_name(aug.kind)) + " query for sample " + x.id);
    }
    return ReformulatedQuery(x.id, aug.kind, std::move(text), aug);
}

QueryClassification Engine::classify_with_query(const Sample& x, const ReformulatedQuery& q, const LabelSet& labels,
                                                Trail* trail) const {
    const auto prompt = prompts::build_classification_prompt(x, q.text(), labels, config_.concise);
    auto c = call(step_name("classify", q.kind()), prompt, config_.classifier_model, config_.classification, true,
                  trail);
    auto s = score_response(c.response, labels);
    return QueryClassification{q, s.label, s.confidence, llm::response_digest(c.response), c.degraded};
}

QueryClassification Engine::run_chain(const Sample& x, AugmentationKind kind, const LabelSet& labels,
                                      Trail* trail) const {
    auto aug = at_step(step_name("augment", kind), [&] { return generate_augmentation(x, kind, labels, trail); });
    auto q = at_step(step_name("query", kind), [&] { return generate_query(x, aug, trail); });
    return at_step(step_name("classify", kind), [&] { return classify_with_query(x, q, labels, trail); });
}

prompts::RenderedPrompt Engine::ranked_prompt(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                                              const RankingVariant& variant) const {
    auto input = qs.ranking_input();
    switch (variant.kind) {
        case RankingVariant::Kind::Full: break;
        case RankingVariant::Kind::None: input.order.reset(); break;
        case RankingVariant::Kind::Random: input.order = random_order(variant.seed, x.id); break;
    }
    return prompts::build_ranked_prompt(x, input, labels);
}

LabelScore Engine::classify_ranked(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                                   const RankingVariant& variant, Trail* trail) const {
    const auto prompt = ranked_prompt(x, qs, labels, variant);
    if (config_.argmax == ArgmaxStrategy::PerLabel) return score_per_label("final", prompt, labels, trail);
    auto c = call("final", prompt, config_.classifier_model, config_.classification, true, trail);
    auto s = score_response(c.response, labels);
    s.degraded = c.degraded;
    return s;
}

namespace {

bool any_degraded(const RankedQuerySet& qs) {
    return std::any_of(qs.by_kind().begin(), qs.by_kind().end(), [](const auto& c) { return c.degraded; });
}

}  // namespace

Prediction Engine::classify_final(const Sample& x, const RankedQuerySet& qs, const LabelSet& labels,
                                  Trail prior_trail) const {
    auto s = classify_ranked(x, qs, labels, RankingVariant::full(), &prior_trail);
    return Prediction(x.id, x.dataset_id, Mode::prompt_ranking(), s.label, s.confidence, qs, std::nullopt,
                      std::move(prior_trail), s.degraded || any_degraded(qs));
}

Prediction Engine::run_baseline(const Sample& x, const LabelSet& labels, prompts::Baseline baseline) const {
    std::optional<prompts::Definitions> builtin;
    const prompts::Definitions* defs = nullptr;
    if (baseline == prompts::Baseline::DEF) {
        if (config_.definitions) {
            defs = &*config_.definitions;
        } else if ((builtin = prompts::Definitions::builtin(x.dataset_id))) {
            defs = &*builtin;
        }
    }
    const auto prompt = prompts::build_baseline_prompt(x, labels, baseline, defs);
    const bool reasoning = baseline == prompts::Baseline::ZCoT;
    Trail trail;
    auto c = call("baseline", prompt, config_.classifier_model, reasoning ? config_.reasoning : config_.classification,
                  true, &trail);
    auto s = reasoning ? score_reasoning(c.response, labels) : score_response(c.response, labels);
    return Prediction(x.id, x.dataset_id, Mode::baseline(baseline), s.label, s.confidence, std::nullopt, std::nullopt,
                      std::move(trail), c.degraded);
}

Prediction Engine::run_pipeline(const Sample& x, const LabelSet& labels, const Mode& mode) const {
    switch (mode.kind) {
        case Mode::Kind::ZeroShot:
            return at_step("baseline", [&] { return run_baseline(x, labels, prompts::Baseline::ZeroShot); });
        case Mode::Kind::ZCoT:
            return at_step("baseline", [&] { return run_baseline(x, labels, prompts::Baseline::ZCoT); });
        case Mode::Kind::DEF:
            return at_step("baseline", [&] { return run_baseline(x, labels, prompts::Baseline::DEF); });
        case Mode::Kind::SingleQuery: {
            Trail trail;
            auto c = run_chain(x, mode.query_kind, labels, &trail);
            const bool degraded = c.degraded;
            auto label = c.predicted;
            auto conf = c.confidence;
            return Prediction(x.id, x.dataset_id, mode, std::move(label), conf, std::nullopt, std::move(c),
                              std::move(trail), degraded);
        }
        default: break;
    }

    std::vector<Trail> trails(kAllKinds.size());
    std::vector<QueryClassification> cs;
    if (config_.parallel_chains) {
        std::vector<std::future<QueryClassification>> futures;
        for (std::size_t i = 0; i < kAllKinds.size(); ++i) {
            futures.push_back(std::async(std::launch::async,
                                         [&, i] { return run_chain(x, kAllKinds[i], labels, &trails[i]); }));
        }
        std::exception_ptr first_error;
        for (auto& f : futures) {
            try {
                cs.push_back(f.get());
            } catch (...) {
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    } else {
        for (std::size_t i = 0; i < kAllKinds.size(); ++i) cs.push_back(run_chain(x, kAllKinds[i], labels, &trails[i]));
    }
    Trail trail;
    for (auto& t : trails) trail.insert(trail.end(), t.begin(), t.end());

    auto qs = rank_queries(std::move(cs));
    RankingVariant variant = RankingVariant::full();
    if (mode.kind == Mode::Kind::RankedNone) variant = RankingVariant::none();
    if (mode.kind == Mode::Kind::RankedRandom) variant = RankingVariant::random(mode.seed);
    auto s = at_step("final", [&] { return classify_ranked(x, qs, labels, variant, &trail); });
    const bool degraded = s.degraded || any_degraded(qs);
    return Prediction(x.id, x.dataset_id, mode, s.label, s.confidence, std::move(qs), std::nullopt, std::move(trail),
                      degraded);
}

}  // namespace fallacy::pipeline
