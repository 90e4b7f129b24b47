#include <gtest/gtest.h>

#include <cmath>

#include "fallacy/ablation.hpp"
#include "fallacy/llm/mock_backend.hpp"
#include "fallacy/text_util.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fallacy;
using namespace fallacy::ablation;
namespace t = fallacy::testing;
using pipeline::Engine;
using pipeline::RankedQuerySet;

namespace {

TableNeighborSource fixture_table() {
    return TableNeighborSource::from_file(std::filesystem::path(t::test_dir()) / "fixtures" / "neighbors.tsv");
}

pipeline::ReformulatedQuery query(const std::string& text, AugmentationKind kind = AugmentationKind::Counterargument) {
    return pipeline::ReformulatedQuery("starbucks", kind, text, pipeline::Augmentation{"starbucks", kind, "aug", "d"});
}

// Independent tokenizer pass: alphabetic words, apostrophes kept.
std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + " ") {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    return out;
}

struct Stored {
    LabelSet labels = t::five_labels();
    std::vector<Sample> samples = t::synthetic_samples(6, labels);
    std::shared_ptr<llm::MockBackend> mock;
    std::unique_ptr<Engine> engine;
    StoredRun run;

    Stored() {
        mock = std::make_shared<llm::MockBackend>(t::synthetic_rules(samples, labels));
        engine = std::make_unique<Engine>(mock, pipeline::EngineConfig{});
        std::vector<pipeline::Prediction> preds;
        for (const auto& x : samples) preds.push_back(engine->run_pipeline(x, labels, pipeline::Mode::prompt_ranking()));
        run = index_run(preds);
    }
};

}  // namespace

TEST(Variant, FullMatchesClassifyFinal) {
    Stored s;
    const auto& x = s.samples[0];
    const auto& qs = *s.run.at(x.id).ranked();
    const auto before = s.mock->calls();
    auto p = classify_ranked_variant(*s.engine, x, qs, RankingVariant::full(), s.labels);
    const auto full_prompt = s.mock->requests().back().prompt;
    auto q = s.engine->classify_final(x, qs, s.labels);
    EXPECT_EQ(s.mock->requests().back().prompt, full_prompt);
    EXPECT_EQ(s.engine->ranked_prompt(x, qs, s.labels, RankingVariant::full()).text, full_prompt);
    EXPECT_EQ(s.mock->calls() - before, 2u);
    EXPECT_EQ(p.label(), q.label());
    EXPECT_EQ(p.trail().size(), 1u);
    EXPECT_EQ(p.mode(), pipeline::Mode::prompt_ranking());
}

TEST(Variant, NoneDropsOnlyRankingLine) {
    Stored s;
    for (const auto& x : s.samples) {
        const auto& qs = *s.run.at(x.id).ranked();
        const auto full = s.engine->ranked_prompt(x, qs, s.labels, RankingVariant::full()).text;
        const auto none = s.engine->ranked_prompt(x, qs, s.labels, RankingVariant::none()).text;
        const auto line = "Ranking Information: " + prompts::ranking_line(qs.order()) + "\n";
        const auto pos = full.find(line);
        ASSERT_NE(pos, std::string::npos);
        EXPECT_EQ(std::string(full).erase(pos, line.size()), none);
    }
}

TEST(Variant, RandomUsesSeededOrder) {
    Stored s;
    const auto& x = s.samples[1];
    const auto& qs = *s.run.at(x.id).ranked();
    const auto p = s.engine->ranked_prompt(x, qs, s.labels, RankingVariant::random(2)).text;
    EXPECT_NE(p.find("Ranking Information: " + prompts::ranking_line(pipeline::random_order(2, x.id))),
              std::string::npos);
}

TEST(Variant, RunAndAverageFiveSeeds) {
    Stored s;
    auto avg = run_random_averaged(*s.engine, s.samples, s.run, s.labels, kDefaultSeeds, 2);
    ASSERT_EQ(avg.per_seed.size(), 5u);
    EXPECT_EQ(avg.seeds, kDefaultSeeds);
    double mean = 0.0;
    for (const auto& r : avg.per_seed) mean += r.accuracy;
    mean /= 5.0;
    double var = 0.0;
    for (const auto& r : avg.per_seed) var += (r.accuracy - mean) * (r.accuracy - mean);
    EXPECT_NEAR(avg.mean_accuracy, mean, 1e-12);
    EXPECT_NEAR(avg.std_accuracy, std::sqrt(var / 5.0), 1e-12);
    EXPECT_EQ(avg.per_seed[0].mode, "ranking-random:0");
    EXPECT_THROW(run_random_averaged(*s.engine, s.samples, s.run, s.labels, {}), std::invalid_argument);
}

TEST(Variant, MissingRankedSet) {
    Stored s;
    StoredRun empty;
    EXPECT_THROW(run_variant(*s.engine, s.samples, empty, RankingVariant::none(), s.labels), DataError);
}

TEST(Neighbors, ParseAndLookup) {
    auto table = TableNeighborSource::parse("Word\tA, b\n\n# c\nother\tz\n");
    EXPECT_EQ(table.size(), 2u);
    EXPECT_EQ(table.neighbors("WORD"), (std::vector<std::string>{"A", "b"}));
    EXPECT_TRUE(table.neighbors("missing").empty());
    EXPECT_THROW(TableNeighborSource::from_file("/nonexistent/neighbors.tsv"), NeighborSourceUnavailable);
}

TEST(ContentWords, Filter) {
    EXPECT_TRUE(is_content_word("Starbucks"));
    EXPECT_FALSE(is_content_word("the"));
    EXPECT_FALSE(is_content_word("THE"));
    EXPECT_FALSE(is_content_word("42"));
    EXPECT_TRUE(is_content_word("speaker's"));
    EXPECT_GT(stopwords().size(), 100u);
}

TEST(Perturb, RatioZeroIsIdentity) {
    auto table = fixture_table();
    auto q = query(t::kCgQuery);
    auto p = perturb_query(q, {0.0, "table", 1}, &table);
    EXPECT_EQ(p.query, q);
    EXPECT_EQ(p.replaced, 0u);
    EXPECT_EQ(p.target, 0u);
}

TEST(Perturb, HalfOfStarbucksQuery) {
    auto table = fixture_table();
    auto q = query(t::kCgQuery);
    auto p = perturb_query(q, {0.5, "table", 3}, &table);
    auto before = words_of(q.text());
    auto after = words_of(p.query.text());
    ASSERT_EQ(before.size(), after.size());
    std::size_t content = 0, changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (is_content_word(before[i])) ++content;
        if (before[i] != after[i]) {
            ++changed;
            auto ns = table.neighbors(before[i]);
            ASSERT_FALSE(ns.empty());
            EXPECT_TRUE(text::iequals(after[i], ns.front())) << before[i] << " -> " << after[i];
        }
    }
    EXPECT_EQ(content, 6u);
    EXPECT_EQ(p.content_words, 6u);
    EXPECT_EQ(changed, 3u);
    EXPECT_EQ(p.replaced, 3u);
    EXPECT_EQ(p.shortfall(), 0u);
    EXPECT_EQ(perturb_query(q, {0.5, "table", 3}, &table).query.text(), p.query.text());
}

TEST(Perturb, CountsMatchCeilOnFullCoverage) {
    auto table = fixture_table();
    for (const auto& text : {t::kCgQuery, t::kGoQuery}) {
        auto q = query(text);
        for (double r : {0.0, 0.1, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0}) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                auto p = perturb_query(q, {r, "table", seed}, &table);
                const auto expect = static_cast<std::size_t>(std::ceil(r * static_cast<double>(p.content_words) - 1e-9));
                EXPECT_EQ(p.replaced, expect) << text << " r=" << r;
            }
        }
    }
}

TEST(Perturb, CasingAndShortfall) {
    auto table = TableNeighborSource::parse("starbucks\tcafe\n");
    auto p = perturb_query(query("STARBUCKS and Starbucks and unknown"), {1.0, "t", 0}, &table);
    EXPECT_EQ(p.query.text(), "CAFE and Cafe and unknown");
    EXPECT_EQ(p.target, 3u);
    EXPECT_EQ(p.replaced, 2u);
    EXPECT_EQ(p.shortfall(), 1u);
    EXPECT_THROW(perturb_query(query("x"), {0.5, "t", 0}, nullptr), NeighborSourceUnavailable);
    EXPECT_THROW(perturb_query(query("x"), {1.5, "t", 0}, &table), std::invalid_argument);
}

TEST(Subset, MostDiverseDraw) {
    auto labels = t::five_labels();
    auto pool = t::synthetic_samples(300, labels);
    auto d = draw_diverse_subset(pool, 100, 5, 0);
    EXPECT_EQ(d.samples.size(), 100u);
    ASSERT_EQ(d.unique_per_draw.size(), 5u);
    const auto best = *std::max_element(d.unique_per_draw.begin(), d.unique_per_draw.end());
    EXPECT_EQ(d.unique_per_draw[d.chosen_draw], best);
    for (std::size_t i = 0; i < d.chosen_draw; ++i) EXPECT_LT(d.unique_per_draw[i], best);
    auto again = draw_diverse_subset(pool, 100, 5, 0);
    EXPECT_EQ(again.chosen_draw, d.chosen_draw);
    EXPECT_EQ(again.samples.front().id, d.samples.front().id);
}

TEST(Perturbation, ScoreNonIncreasingOnDegradingMock) {
    auto labels = t::five_labels();
    auto samples = t::synthetic_samples(4, labels);
    std::vector<llm::MockRule> rules;
    StoredRun stored;
    for (const auto& x : samples) {
        std::vector<pipeline::QueryClassification> cs;
        for (auto kind : kAllKinds) {
            const auto qtext = "How does the counterargument challenge the assumption about " + x.id + "?";
            auto cp = prompts::build_classification_prompt(x, qtext, labels, true).text;
            rules.push_back(t::exact(cp, x.gold_label.name(), t::tokens(x.gold_label.name(), {-0.1})));
            const auto head = cp.substr(0, cp.find("Formulated Prompt: ") + 19);
            const auto& wrong = labels[(*labels.index_of(x.gold_label) + 1) % labels.size()].name();
            rules.push_back(t::prefix(head, wrong, t::tokens(wrong, {-0.2})));
            pipeline::ReformulatedQuery q(x.id, kind, qtext, pipeline::Augmentation{x.id, kind, "a", "d"});
            cs.push_back({q, x.gold_label, -0.1, "r", false});
        }
        stored.insert_or_assign(x.id, pipeline::Prediction(x.id, x.dataset_id, pipeline::Mode::prompt_ranking(),
                                                           x.gold_label, -0.1, RankedQuerySet(cs), std::nullopt,
                                                           {{"final", "p", "k", "r"}}));
    }
    Engine engine(std::make_shared<llm::MockBackend>(rules), {});
    auto table = fixture_table();
    auto points = run_perturbation(engine, samples, stored, {{labels.dataset_id(), labels}}, table, {0.0, 0.5, 1.0}, 0, 2);
    ASSERT_EQ(points.size(), 9u);
    for (auto kind : kAllKinds) {
        std::vector<double> accs;
        for (const auto& p : points) {
            if (p.kind == kind) accs.push_back(p.report.accuracy);
        }
        ASSERT_EQ(accs.size(), 3u);
        EXPECT_EQ(accs[0], 1.0);
        for (std::size_t i = 1; i < accs.size(); ++i) EXPECT_LE(accs[i], accs[i - 1]);
    }
    EXPECT_EQ(points[0].report.mode, "perturb:CG");
}

TEST(Csv, LongFormat) {
    eval::EvalReport r;
    r.accuracy = 0.5;
    r.macro_f1 = 0.25;
    EXPECT_EQ(csv_header(), "dataset,experiment,setting,kind,seed,accuracy,macro_f1");
    EXPECT_EQ(csv_row("ARGOTARIO", "ranking", "random", "", 3, r), "ARGOTARIO,ranking,random,,3,0.500000,0.250000");
}
