#include "fallacy/ablation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fallacy/csv.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/parallel.hpp"
#include "fallacy/random.hpp"
#include "fallacy/resources.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::ablation {

using pipeline::Mode;
using pipeline::Prediction;

namespace {

Mode mode_for(const RankingVariant& v) {
    switch (v.kind) {
        case RankingVariant::Kind::Full: return Mode::prompt_ranking();
        case RankingVariant::Kind::None: return Mode::ranked_none();
        case RankingVariant::Kind::Random: return Mode::ranked_random(v.seed);
    }
    return Mode::prompt_ranking();
}

// Union of several label sets, first spelling wins.
LabelSet merged_labels(const std::map<std::string, LabelSet>& sets) {
    if (sets.size() == 1) return sets.begin()->second;
    std::vector<FallacyLabel> all;
    for (const auto& [id, set] : sets) {
        for (const auto& l : set) {
            bool seen = std::any_of(all.begin(), all.end(), [&](const auto& a) { return text::iequals(a.name(), l.name()); });
            if (!seen) all.push_back(l);
        }
    }
    return LabelSet("MIXED", std::move(all));
}

}  // namespace

Prediction classify_ranked_variant(const pipeline::Engine& engine, const Sample& x, const pipeline::RankedQuerySet& qs,
                                   const RankingVariant& variant, const LabelSet& labels) {
    pipeline::Trail trail;
    auto s = engine.classify_ranked(x, qs, labels, variant, &trail);
    bool degraded = s.degraded;
    for (const auto& c : qs.by_kind()) degraded = degraded || c.degraded;
    return Prediction(x.id, x.dataset_id, mode_for(variant), s.label, s.confidence, qs, std::nullopt, std::move(trail),
                      degraded);
}

StoredRun index_run(const std::vector<Prediction>& predictions) {
    StoredRun out;
    for (const auto& p : predictions) out.insert_or_assign(p.sample_id(), p);
    return out;
}

VariantResult run_variant(const pipeline::Engine& engine, const std::vector<Sample>& samples, const StoredRun& stored,
                          const RankingVariant& variant, const LabelSet& labels, std::size_t workers) {
    VariantResult out{variant, {}, {}};
    std::vector<const pipeline::RankedQuerySet*> sets;
    for (const auto& x : samples) {
        auto it = stored.find(x.id);
        if (it == stored.end() || !it->second.ranked()) {
            throw DataError("stored run has no ranked queries for sample " + x.id);
        }
        sets.push_back(&*it->second.ranked());
    }
    std::vector<std::optional<Prediction>> slots(samples.size());
    parallel_for(samples.size(), workers,
                 [&](std::size_t i) { slots[i] = classify_ranked_variant(engine, samples[i], *sets[i], variant, labels); });
    for (auto& p : slots) out.predictions.push_back(std::move(*p));
    out.report = eval::score(out.predictions, eval::gold_map(samples), labels);
    out.report.mode = "ranking-" + variant.to_string();
    return out;
}

Averaged average_reports(std::vector<eval::EvalReport> reports, std::vector<std::uint64_t> seeds) {
    Averaged out;
    out.seeds = std::move(seeds);
    out.per_seed = std::move(reports);
    if (out.per_seed.empty()) return out;
    const double n = static_cast<double>(out.per_seed.size());
    for (const auto& r : out.per_seed) {
        out.mean_accuracy += r.accuracy / n;
        out.mean_macro_f1 += r.macro_f1 / n;
    }
    double var_acc = 0.0, var_f1 = 0.0;
    for (const auto& r : out.per_seed) {
        var_acc += (r.accuracy - out.mean_accuracy) * (r.accuracy - out.mean_accuracy) / n;
        var_f1 += (r.macro_f1 - out.mean_macro_f1) * (r.macro_f1 - out.mean_macro_f1) / n;
    }
    out.std_accuracy = std::sqrt(var_acc);
    out.std_macro_f1 = std::sqrt(var_f1);
    return out;
}

Averaged run_random_averaged(const pipeline::Engine& engine, const std::vector<Sample>& samples,
                             const StoredRun& stored, const LabelSet& labels, const std::vector<std::uint64_t>& seeds,
                             std::size_t workers) {
    if (seeds.empty()) throw std::invalid_argument("random ranking needs at least one seed");
    std::vector<eval::EvalReport> reports;
    for (auto seed : seeds) {
        reports.push_back(run_variant(engine, samples, stored, RankingVariant::random(seed), labels, workers).report);
    }
    return average_reports(std::move(reports), seeds);
}

TableNeighborSource::TableNeighborSource(std::string id, std::map<std::string, std::vector<std::string>> table)
    : id_(std::move(id)) {
    for (auto& [word, list] : table) table_[text::to_lower(word)] = std::move(list);
}

TableNeighborSource TableNeighborSource::parse(std::string_view tsv, std::string id) {
    std::map<std::string, std::vector<std::string>> table;
    for (const auto& raw : text::split(tsv, '\n')) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string_view::npos) continue;
        std::vector<std::string> neighbors;
        for (const auto& n : text::split(line.substr(tab + 1), ',')) {
            auto t = text::trim(n);
            if (!t.empty()) neighbors.emplace_back(t);
        }
        auto word = text::to_lower(text::trim(line.substr(0, tab)));
        auto& slot = table[word];
        slot.insert(slot.end(), neighbors.begin(), neighbors.end());
    }
    return TableNeighborSource(std::move(id), std::move(table));
}

TableNeighborSource TableNeighborSource::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NeighborSourceUnavailable("cannot read neighbor table " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.filename().string());
}

std::vector<std::string> TableNeighborSource::neighbors(std::string_view word) const {
    auto it = table_.find(text::to_lower(word));
    return it == table_.end() ? std::vector<std::string>{} : it->second;
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = [] {
        std::set<std::string> out;
        for (const auto& line : text::split(resources::get("stopwords_en.txt"), '\n')) {
            auto w = text::to_lower(text::trim(line));
            if (!w.empty() && w.front() != '#') out.insert(w);
        }
        return out;
    }();
    return words;
}

bool is_content_word(std::string_view token) {
    if (token.empty()) return false;
    bool has_alpha = false;
    for (unsigned char c : token) {
        if (std::isalpha(c) || c >= 0x80) {
            has_alpha = true;
        } else if (c != '\'' && c != '-') {
            return false;
        }
    }
    return has_alpha && !stopwords().contains(text::to_lower(token));
}

void PerturbationPlan::validate() const {
    if (!(change_ratio >= 0.0 && change_ratio <= 1.0)) throw std::invalid_argument("change ratio must be in [0, 1]");
}

namespace {

struct Token {
    std::string text;
    bool word;
};

// Words are runs of letters, digits, apostrophes and inner hyphens; all
// other characters are kept verbatim between them.
std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto wordish = [](char c) { return text::is_word_char(c) || c == '\''; };
    while (i < s.size()) {
        std::size_t j = i;
        if (wordish(s[i])) {
            while (j < s.size() && (wordish(s[j]) || (s[j] == '-' && j + 1 < s.size() && wordish(s[j + 1])))) ++j;
            out.push_back({std::string(s.substr(i, j - i)), true});
        } else {
            while (j < s.size() && !wordish(s[j])) ++j;
            out.push_back({std::string(s.substr(i, j - i)), false});
        }
        i = j;
    }
    return out;
}

std::string match_case(const std::string& original, std::string replacement) {
    bool all_upper = original.size() > 1;
    for (unsigned char c : original) {
        if (std::isalpha(c) && !std::isupper(c)) all_upper = false;
    }
    if (all_upper) {
        for (auto& c : replacement) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) && !replacement.empty()) {
        replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
    }
    return replacement;
}

}  // namespace

Perturbed perturb_query(const pipeline::ReformulatedQuery& q, const PerturbationPlan& plan,
                        const NeighborSource* source) {
    plan.validate();
    if (!source) throw NeighborSourceUnavailable("no neighbor source '" + plan.neighbor_source + "' loaded");
    auto tokens = tokenize(q.text());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].word && is_content_word(tokens[i].text)) candidates.push_back(i);
    }
    const std::size_t k = candidates.size();
    // guard against 0.3 * 10 landing a hair above 3
    const auto target = static_cast<std::size_t>(std::ceil(plan.change_ratio * static_cast<double>(k) - 1e-9));

    Rng rng(mix_seed(plan.seed, q.sample_id() + "/" + std::string(short_name(q.kind()))));
    rng.shuffle(candidates);
    std::size_t replaced = 0;
    for (auto idx : candidates) {
        if (replaced >= target) break;
        const auto& word = tokens[idx].text;
        std::optional<std::string> pick;
        for (const auto& n : source->neighbors(word)) {
            if (!text::iequals(n, word)) {
                pick = n;
                break;
            }
        }
        if (!pick) continue;
        tokens[idx].text = match_case(word, *pick);
        ++replaced;
    }
    std::string out;
    for (const auto& t : tokens) out += t.text;
    return Perturbed{pipeline::ReformulatedQuery(q.sample_id(), q.kind(), std::move(out), q.source_augmentation()), k,
                     target, replaced};
}

DiverseDraw draw_diverse_subset(const std::vector<Sample>& pool, std::size_t size, std::size_t draws,
                                std::uint64_t seed) {
    if (draws == 0) throw std::invalid_argument("need at least one draw");
    DiverseDraw out;
    std::optional<std::vector<std::size_t>> best;
    std::size_t best_unique = 0;
    Rng rng(seed);
    for (std::size_t d = 0; d < draws; ++d) {
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(std::min(size, idx.size()));
        std::set<std::string> unique;
        for (auto i : idx) unique.insert(pool[i].gold_label.name());
        out.unique_per_draw.push_back(unique.size());
        if (!best || unique.size() > best_unique) {
            best = idx;
            best_unique = unique.size();
            out.chosen_draw = d;
        }
    }
    for (auto i : *best) out.samples.push_back(pool[i]);
    return out;
}

std::vector<PerturbationPoint> run_perturbation(const pipeline::Engine& engine, const std::vector<Sample>& samples,
                                                const StoredRun& stored,
                                                const std::map<std::string, LabelSet>& label_sets,
                                                const NeighborSource& source, const std::vector<double>& ratios,
                                                std::uint64_t seed, std::size_t workers) {
    for (const auto& x : samples) {
        if (!label_sets.contains(x.dataset_id)) throw DataError("no label set for dataset " + x.dataset_id);
        auto it = stored.find(x.id);
        if (it == stored.end()) throw DataError("stored run has no record for sample " + x.id);
    }
    const auto gold = eval::gold_map(samples);
    const auto all_labels = merged_labels(label_sets);
    std::vector<PerturbationPoint> out;
    for (auto kind : kAllKinds) {
        for (double ratio : ratios) {
            PerturbationPlan plan{ratio, source.id(), seed};
            plan.validate();
            std::vector<std::optional<Prediction>> slots(samples.size());
            std::vector<std::size_t> shortfall(samples.size(), 0);
            parallel_for(samples.size(), workers, [&](std::size_t i) {
                const auto& x = samples[i];
                const auto& rec = stored.at(x.id);
                const pipeline::QueryClassification* base = nullptr;
                if (rec.ranked()) {
                    base = &rec.ranked()->at(kind);
                } else if (rec.single() && rec.single()->kind() == kind) {
                    base = &*rec.single();
                }
                if (!base) throw DataError("stored run has no " + std::string(short_name(kind)) + " query for " + x.id);
                auto p = perturb_query(base->query, plan, &source);
                shortfall[i] = p.shortfall();
                pipeline::Trail trail;
                auto c = engine.classify_with_query(x, p.query, label_sets.at(x.dataset_id), &trail);
                auto label = c.predicted;
                auto conf = c.confidence;
                const bool degraded = c.degraded;
                slots[i] = Prediction(x.id, x.dataset_id, Mode::single_query(kind), std::move(label), conf,
                                      std::nullopt, std::move(c), std::move(trail), degraded);
            });
            std::vector<Prediction> preds;
            for (auto& s : slots) preds.push_back(std::move(*s));
            PerturbationPoint point{kind, ratio, eval::score(preds, gold, all_labels), 0};
            point.report.mode = "perturb:" + std::string(short_name(kind));
            point.shortfall = std::accumulate(shortfall.begin(), shortfall.end(), std::size_t{0});
            out.push_back(std::move(point));
        }
    }
    return out;
}

std::string csv_header() { return "dataset,experiment,setting,kind,seed,accuracy,macro_f1"; }

std::string csv_row(const std::string& dataset, const std::string& experiment, const std::string& setting,
                    const std::string& kind, const std::optional<std::uint64_t>& seed, const eval::EvalReport& r) {
    char acc[32], f1[32];
    std::snprintf(acc, sizeof acc, "%.6f", r.accuracy);
    std::snprintf(f1, sizeof f1, "%.6f", r.macro_f1);
    return csv::format_row(
        {dataset, experiment, setting, kind, seed ? std::to_string(*seed) : std::string{}, acc, f1});
}

}  // namespace fallacy::ablation
