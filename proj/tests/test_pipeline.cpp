#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fallacy/llm/mock_backend.hpp"
#include "fallacy/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fallacy;
using namespace fallacy::pipeline;
namespace t = fallacy::testing;
using llm::MockBackend;
using llm::TokenLogProb;

namespace {

struct Fixture {
    LabelSet labels = t::five_labels();
    Sample x = t::starbucks(labels);
    std::shared_ptr<MockBackend> mock;
    Engine engine;

    explicit Fixture(EngineConfig config = {}, t::SampleScript script = t::starbucks_script())
        : mock(std::make_shared<MockBackend>(t::rules_for(x, labels, script, config))), engine(mock, config) {}
};

Augmentation aug_of(AugmentationKind kind, std::string text = "aug") { return {"starbucks", kind, std::move(text), "d"}; }

std::vector<std::string> steps(const Trail& trail) {
    std::vector<std::string> out;
    for (const auto& e : trail) out.push_back(e.step);
    return out;
}

}  // namespace

TEST(Augment, GoalFromScript) {
    auto script = t::starbucks_script();
    script.augmentations[AugmentationKind::Goal] =
        "The goal of this text is to make a generalization about girls liking Starbucks based on the assumption "
        "that Annie is a girl.";
    Fixture f({}, script);
    auto aug = f.engine.generate_augmentation(f.x, AugmentationKind::Goal, f.labels);
    EXPECT_EQ(aug.text, script.augmentations[AugmentationKind::Goal]);
    EXPECT_EQ(aug.kind, AugmentationKind::Goal);
    EXPECT_EQ(aug.sample_id, "starbucks");
    EXPECT_EQ(aug.prompt_digest.size(), 64u);
}

TEST(Augment, CounterargumentFromScript) {
    Fixture f;
    auto aug = f.engine.generate_augmentation(f.x, AugmentationKind::Counterargument, f.labels);
    EXPECT_EQ(aug.text.rfind("Not all girls like Starbucks", 0), 0u);
}

TEST(Augment, EmptyGeneration) {
    auto script = t::starbucks_script();
    script.augmentations[AugmentationKind::Goal] = "  ";
    Fixture f({}, script);
    EXPECT_THROW(f.engine.generate_augmentation(f.x, AugmentationKind::Goal, f.labels), EmptyGeneration);
}

TEST(Query, FromAugmentation) {
    Fixture f;
    auto go = f.engine.generate_query(f.x, aug_of(AugmentationKind::Goal, t::kGoAug));
    EXPECT_EQ(go.text(), t::kGoQuery);
    EXPECT_EQ(go.kind(), AugmentationKind::Goal);
    auto cg = f.engine.generate_query(f.x, aug_of(AugmentationKind::Counterargument, t::kCgAug));
    EXPECT_EQ(cg.text(), t::kCgQuery);
}

TEST(Query, KindMismatchRejected) {
    EXPECT_THROW(ReformulatedQuery("s", AugmentationKind::Goal, "q", aug_of(AugmentationKind::Explanation)),
                 std::invalid_argument);
}

namespace {

QueryClassification classify_reply(const std::string& text, std::optional<std::vector<TokenLogProb>> toks) {
    auto labels = t::five_labels();
    auto x = t::starbucks(labels);
    ReformulatedQuery q("starbucks", AugmentationKind::Goal, t::kGoQuery, aug_of(AugmentationKind::Goal));
    auto mock = std::make_shared<MockBackend>(std::vector<llm::MockRule>{
        t::exact(prompts::build_classification_prompt(x, t::kGoQuery, labels, true).text, text, toks)});
    Engine engine(mock, {});
    return engine.classify_with_query(x, q, labels);
}

}  // namespace

TEST(Classify, SumsLabelTokens) {
    auto c = classify_reply("Red Herring", std::vector<TokenLogProb>{{"Red", -0.1}, {" Herring", -0.2}});
    EXPECT_EQ(c.predicted, FallacyLabel("Red Herring"));
    ASSERT_TRUE(c.confidence);
    EXPECT_NEAR(*c.confidence, -0.3, 1e-12);
    EXPECT_FALSE(c.degraded);
}

TEST(Classify, SingleTokenCertain) {
    auto c = classify_reply("Ad Hominem", std::vector<TokenLogProb>{{"Ad Hominem", 0.0}});
    EXPECT_EQ(c.confidence, 0.0);
}

TEST(Classify, NoLabel) {
    auto c = classify_reply("none of these", std::vector<TokenLogProb>{{"none", -0.1}, {" of", -0.1}, {" these", -0.1}});
    EXPECT_FALSE(c.predicted);
    EXPECT_FALSE(c.confidence);
}

TEST(Classify, MissingLogprobsDegrades) {
    auto c = classify_reply("Red Herring", std::nullopt);
    EXPECT_EQ(c.predicted, FallacyLabel("Red Herring"));
    EXPECT_FALSE(c.confidence);
    EXPECT_TRUE(c.degraded);
}

TEST(Classify, PropertyAgainstSpanOracle) {
    std::mt19937_64 rng(2024);
    const auto labels = t::five_labels();
    for (int i = 0; i < 200; ++i) {
        auto reply = oracle::synthetic_reply(rng, labels);
        auto score = score_response(llm::GenerationResponse{reply.text, reply.tokens, "m", false}, labels);
        auto expected = oracle::expected_confidence(reply);
        ASSERT_EQ(score.confidence.has_value(), expected.has_value()) << reply.text;
        if (expected) EXPECT_NEAR(*score.confidence, *expected, 1e-12) << reply.text;
        EXPECT_EQ(score.label.has_value(), reply.label.has_value());
    }
}

TEST(Rank, WorkedExample) {
    using K = AugmentationKind;
    auto qs = rank_queries({oracle::classification(K::Counterargument, -2.0), oracle::classification(K::Explanation, -0.1),
                            oracle::classification(K::Goal, -0.5)});
    EXPECT_EQ(qs.order(), (std::vector<K>{K::Explanation, K::Goal, K::Counterargument}));
    EXPECT_EQ(prompts::ranking_line(qs.order()), "Explanation Query, Goal Query, Counterargument Query");
}

TEST(Rank, TiesAndAbsent) {
    using K = AugmentationKind;
    auto ties = rank_queries({oracle::classification(K::Goal, -1.0), oracle::classification(K::Explanation, -1.0),
                              oracle::classification(K::Counterargument, -1.0)});
    EXPECT_EQ(ties.order(), (std::vector<K>{K::Counterargument, K::Explanation, K::Goal}));
    auto absent = rank_queries({oracle::classification(K::Counterargument, -0.2),
                                oracle::classification(K::Explanation, std::nullopt),
                                oracle::classification(K::Goal, -0.9)});
    EXPECT_EQ(absent.order(), (std::vector<K>{K::Counterargument, K::Goal, K::Explanation}));
}

TEST(Rank, PropertyAgainstPermutationOracle) {
    std::mt19937_64 rng(5);
    const std::vector<std::optional<double>> pool{std::nullopt, 0.0, -0.1, -0.5, -0.5, -2.0};
    for (int i = 0; i < 500; ++i) {
        std::map<AugmentationKind, std::optional<double>> conf;
        std::vector<QueryClassification> cs;
        for (auto k : kAllKinds) {
            conf[k] = pool[rng() % pool.size()];
            cs.push_back(oracle::classification(k, conf[k]));
        }
        std::shuffle(cs.begin(), cs.end(), rng);
        EXPECT_EQ(rank_queries(cs).order(), oracle::brute_force_order(conf));
    }
}

TEST(Rank, RejectsBadSets) {
    using K = AugmentationKind;
    EXPECT_THROW(RankedQuerySet({oracle::classification(K::Goal, -1.0), oracle::classification(K::Goal, -1.0),
                                 oracle::classification(K::Explanation, -1.0)}),
                 std::invalid_argument);
    EXPECT_THROW(RankedQuerySet({oracle::classification(K::Goal, -1.0)}), std::invalid_argument);
    std::vector<QueryClassification> ok{oracle::classification(K::Counterargument, -2.0),
                                        oracle::classification(K::Explanation, -0.1),
                                        oracle::classification(K::Goal, -0.5)};
    EXPECT_THROW(RankedQuerySet(ok, std::vector<K>{K::Counterargument, K::Explanation, K::Goal}), std::invalid_argument);
    EXPECT_NO_THROW(RankedQuerySet(ok, std::vector<K>{K::Explanation, K::Goal, K::Counterargument}));
}

TEST(Pipeline, PromptRankingStarbucks) {
    Fixture f;
    auto p = f.engine.run_pipeline(f.x, f.labels, Mode::prompt_ranking());
    EXPECT_EQ(p.label(), FallacyLabel("Faulty Generalization"));
    ASSERT_TRUE(p.confidence());
    EXPECT_NEAR(*p.confidence(), -0.03, 1e-12);
    EXPECT_EQ(f.mock->calls(), 10u);
    EXPECT_EQ(p.trail().size(), 10u);
    EXPECT_EQ(steps(p.trail()), (std::vector<std::string>{"augment:CG", "query:CG", "classify:CG", "augment:EX",
                                                          "query:EX", "classify:EX", "augment:GO", "query:GO",
                                                          "classify:GO", "final"}));
    ASSERT_TRUE(p.ranked());
    using K = AugmentationKind;
    EXPECT_EQ(p.ranked()->order(), (std::vector<K>{K::Explanation, K::Goal, K::Counterargument}));
    const auto final_prompt = f.mock->requests().back().prompt;
    EXPECT_EQ(final_prompt, t::golden("ranked.txt"));
}

TEST(Pipeline, SingleQueryAndBaselineCallCounts) {
    Fixture f;
    auto single = f.engine.run_pipeline(f.x, f.labels, Mode::single_query(AugmentationKind::Explanation));
    EXPECT_EQ(f.mock->calls(), 3u);
    EXPECT_EQ(single.trail().size(), 3u);
    ASSERT_TRUE(single.single());
    EXPECT_EQ(single.single()->kind(), AugmentationKind::Explanation);

    for (auto b : {prompts::Baseline::ZeroShot, prompts::Baseline::ZCoT, prompts::Baseline::DEF}) {
        const auto before = f.mock->calls();
        auto p = f.engine.run_pipeline(f.x, f.labels, Mode::baseline(b));
        EXPECT_EQ(f.mock->calls() - before, 1u);
        EXPECT_EQ(p.trail().size(), 1u);
        EXPECT_EQ(p.label(), FallacyLabel("Red Herring"));
    }
}

TEST(Pipeline, ParallelChainsMatchSequential) {
    Fixture seq;
    EngineConfig par_cfg;
    par_cfg.parallel_chains = true;
    Fixture par(par_cfg);
    auto a = seq.engine.run_pipeline(seq.x, seq.labels, Mode::prompt_ranking());
    auto b = par.engine.run_pipeline(par.x, par.labels, Mode::prompt_ranking());
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Pipeline, StepFailureNamesStep) {
    auto labels = t::five_labels();
    auto x = t::starbucks(labels);
    auto rules = t::rules_for(x, labels, t::starbucks_script());
    // drop the EX query rule
    auto ex_query = prompts::build_query_prompt(x, AugmentationKind::Explanation, t::kExAug).text;
    std::erase_if(rules, [&](const auto& r) { return r.pattern == ex_query; });
    Engine engine(std::make_shared<MockBackend>(rules), {});
    try {
        engine.run_pipeline(x, labels, Mode::prompt_ranking());
        FAIL();
    } catch (const StepFailure& e) {
        EXPECT_EQ(e.step, "query:EX");
        EXPECT_THROW(std::rethrow_exception(e.cause), MockScriptError);
    }
}

TEST(Pipeline, DegradedWhenFinalHasNoLogprobs) {
    auto labels = t::five_labels();
    auto x = t::starbucks(labels);
    auto rules = t::rules_for(x, labels, t::starbucks_script());
    for (auto& r : rules) {
        if (r.prefix) r.tokens.reset();
    }
    Engine engine(std::make_shared<MockBackend>(rules), {});
    auto p = engine.run_pipeline(x, labels, Mode::prompt_ranking());
    EXPECT_TRUE(p.degraded());
    EXPECT_EQ(p.label(), FallacyLabel("Faulty Generalization"));
    EXPECT_FALSE(p.confidence());
}

TEST(Pipeline, RankedVariantsChangeOnlyTheFinalPrompt) {
    Fixture f;
    f.engine.run_pipeline(f.x, f.labels, Mode::ranked_none());
    const auto none_prompt = f.mock->requests().back().prompt;
    EXPECT_EQ(none_prompt.find("Ranking Information"), std::string::npos);
    auto p = f.engine.run_pipeline(f.x, f.labels, Mode::ranked_random(3));
    EXPECT_EQ(p.mode().to_string(), "ranked-random:3");
    const auto order = random_order(3, f.x.id);
    EXPECT_NE(f.mock->requests().back().prompt.find("Ranking Information: " + prompts::ranking_line(order)),
              std::string::npos);
}

TEST(Pipeline, PerLabelArgmaxUsesEcho) {
    auto labels = t::five_labels();
    auto x = t::starbucks(labels);
    EngineConfig cfg;
    cfg.argmax = ArgmaxStrategy::PerLabel;
    auto rules = t::rules_for(x, labels, t::starbucks_script(), cfg);
    std::erase_if(rules, [](const auto& r) { return r.prefix; });
    auto ranked_text = [&] {
        prompts::RankingInput in;
        in.queries = {{AugmentationKind::Counterargument, t::kCgQuery},
                      {AugmentationKind::Explanation, t::kExQuery},
                      {AugmentationKind::Goal, t::kGoQuery}};
        in.order = std::vector<AugmentationKind>{AugmentationKind::Explanation, AugmentationKind::Goal,
                                                 AugmentationKind::Counterargument};
        return prompts::build_ranked_prompt(x, in, labels).text;
    }();
    const std::map<std::string, double> scores{{"Appeal to Emotion", -3.0},
                                                {"Faulty Generalization", -0.4},
                                                {"Red Herring", -2.0},
                                                {"Ad Hominem", -5.0},
                                                {"Irrelevant Authority", -1.0}};
    for (const auto& [name, lp] : scores) {
        const auto full = ranked_text + " " + name;
        rules.push_back(t::exact(full, full, std::vector<TokenLogProb>{{ranked_text, -9.0}, {" " + name, lp}}));
    }
    auto mock = std::make_shared<MockBackend>(rules);
    Engine engine(mock, cfg);
    auto p = engine.run_pipeline(x, labels, Mode::prompt_ranking());
    EXPECT_EQ(p.label(), FallacyLabel("Faulty Generalization"));
    EXPECT_EQ(p.confidence(), -0.4);
    EXPECT_EQ(mock->calls(), 9u + labels.size());
    EXPECT_TRUE(mock->requests().back().echo);
    EXPECT_EQ(p.trail().back().step, "final:Irrelevant Authority");
}

TEST(Pipeline, ZcotTakesLastMentionedLabel) {
    auto labels = t::five_labels();
    auto x = t::starbucks(labels);
    const std::string reply = "It is not Red Herring. It assumes all girls alike, so Faulty Generalization";
    auto mock = std::make_shared<MockBackend>(std::vector<llm::MockRule>{t::exact(
        prompts::build_baseline_prompt(x, labels, prompts::Baseline::ZCoT).text, reply, t::tokens(reply, {-0.5}))});
    Engine engine(mock, {});
    auto p = engine.run_pipeline(x, labels, Mode::baseline(prompts::Baseline::ZCoT));
    EXPECT_EQ(p.label(), FallacyLabel("Faulty Generalization"));
    ASSERT_TRUE(p.confidence());
    EXPECT_NEAR(*p.confidence(), -1.0, 1e-12);
    EXPECT_EQ(mock->requests().back().max_tokens, 256);
}

TEST(Prediction, Invariants) {
    Trail one{{"final", "p", "k", "r"}};
    EXPECT_THROW(Prediction("s", "D", Mode::prompt_ranking(), std::nullopt, std::nullopt, std::nullopt, std::nullopt, one),
                 std::invalid_argument);
    EXPECT_THROW(Prediction("s", "D", Mode::single_query(AugmentationKind::Goal), std::nullopt, std::nullopt,
                            std::nullopt, std::nullopt, one),
                 std::invalid_argument);
    EXPECT_THROW(oracle::baseline_prediction("s", "D", std::nullopt, 0.5), std::invalid_argument);
    EXPECT_THROW(Prediction("s", "D", Mode::baseline(prompts::Baseline::ZeroShot), std::nullopt, std::nullopt,
                            std::nullopt, std::nullopt, {}),
                 std::invalid_argument);
}

TEST(Prediction, JsonRoundTrip) {
    Fixture f;
    for (const auto& mode : {Mode::prompt_ranking(), Mode::single_query(AugmentationKind::Goal),
                             Mode::baseline(prompts::Baseline::DEF)}) {
        auto p = f.engine.run_pipeline(f.x, f.labels, mode);
        auto back = prediction_from_json(nlohmann::json::parse(to_json(p).dump()));
        EXPECT_EQ(back, p);
    }
    EXPECT_THROW(prediction_from_json(nlohmann::json{{"sample_id", "x"}}), SchemaError);
}

TEST(Mode, ParseRoundTrip) {
    for (const auto& m : {Mode::prompt_ranking(), Mode::single_query(AugmentationKind::Explanation),
                          Mode::baseline(prompts::Baseline::ZeroShot), Mode::baseline(prompts::Baseline::ZCoT),
                          Mode::baseline(prompts::Baseline::DEF), Mode::ranked_none(), Mode::ranked_random(4)}) {
        EXPECT_EQ(Mode::parse(m.to_string()), m);
    }
    EXPECT_EQ(Mode::parse("ours"), Mode::prompt_ranking());
    EXPECT_THROW(Mode::parse("few-shot"), ConfigError);
    EXPECT_THROW(RankingVariant::parse("shuffled"), ConfigError);
    EXPECT_EQ(RankingVariant::parse("random:7"), RankingVariant::random(7));
}

TEST(RandomOrder, SeededAndPerSample) {
    EXPECT_EQ(random_order(1, "a"), random_order(1, "a"));
    std::set<std::vector<AugmentationKind>> seen;
    for (int s = 0; s < 40; ++s) {
        auto o = random_order(static_cast<std::uint64_t>(s), "sample");
        auto sorted = o;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(sorted, std::vector<AugmentationKind>(kAllKinds.begin(), kAllKinds.end()));
        seen.insert(o);
    }
    EXPECT_GT(seen.size(), 3u);
}
