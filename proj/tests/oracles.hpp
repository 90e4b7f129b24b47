#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the code under test for the value
// it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fallacy/core_types.hpp"
#include "fallacy/llm/backend.hpp"
#include "fallacy/pipeline.hpp"

namespace fallacy::oracle {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Sum over the shortest contiguous token run whose text holds `name`
/// (ignoring case), earliest among equals. nullopt when no run does.
inline std::optional<double> span_sum(const std::vector<llm::TokenLogProb>& toks, const std::string& name) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::size_t a = 0; a < toks.size(); ++a) {
        for (std::size_t b = a; b < toks.size(); ++b) {
            std::string s;
            for (std::size_t i = a; i <= b; ++i) s += toks[i].token;
            if (lower(s).find(lower(name)) == std::string::npos) continue;
            if (!best || b - a < best->second - best->first) best = {{a, b}};
        }
    }
    if (!best) return std::nullopt;
    double sum = 0.0;
    for (std::size_t i = best->first; i <= best->second; ++i) sum += toks[i].logprob;
    return sum;
}

/// One synthetic classifier reply: the label alone, or the label after a
/// lead-in, or no label at all, with random logprobs.
struct SyntheticReply {
    std::vector<llm::TokenLogProb> tokens;
    std::string text;
    std::optional<std::string> label;
    bool exact = false;
};

inline SyntheticReply synthetic_reply(std::mt19937_64& rng, const LabelSet& labels) {
    std::uniform_real_distribution<double> lp(-6.0, 0.0);
    SyntheticReply r;
    const auto shape = rng() % 4;
    const auto& name = labels[rng() % labels.size()].name();
    auto push_words = [&](const std::string& words, bool lead_space) {
        std::size_t start = 0;
        bool first = true;
        for (std::size_t i = 1; i <= words.size(); ++i) {
            if (i == words.size() || words[i] == ' ') {
                auto piece = words.substr(start, i - start);
                if (first && lead_space) piece = " " + piece;
                // split long words in two to exercise multi-token spans
                if (piece.size() > 5 && rng() % 2) {
                    const auto cut = piece.size() / 2;
                    r.tokens.push_back({piece.substr(0, cut), lp(rng)});
                    r.tokens.push_back({piece.substr(cut), lp(rng)});
                } else {
                    r.tokens.push_back({piece, lp(rng)});
                }
                start = i;
                first = false;
            }
        }
    };
    if (shape == 0) {
        push_words(name, false);
        r.label = name;
        r.exact = true;
    } else if (shape == 1) {
        push_words("The label is", false);
        push_words(name, true);
        r.label = name;
    } else if (shape == 2) {
        push_words(name, false);
        push_words("fits best here", true);
        r.label = name;
    } else {
        push_words("none of these apply", false);
    }
    for (const auto& t : r.tokens) r.text += t.token;
    return r;
}

/// Confidence expected for a synthetic reply: all tokens for an exact
/// reply, the label span otherwise, nothing without a label.
inline std::optional<double> expected_confidence(const SyntheticReply& r) {
    if (!r.label) return std::nullopt;
    if (r.exact) {
        double sum = 0.0;
        for (const auto& t : r.tokens) sum += t.logprob;
        return std::min(0.0, sum);
    }
    auto s = span_sum(r.tokens, *r.label);
    return s ? std::optional<double>(std::min(0.0, *s)) : std::nullopt;
}

/// Order by trying all 3! permutations and keeping the one whose sort keys
/// (present first, higher confidence, lower kind index) never decrease.
inline std::vector<AugmentationKind> brute_force_order(const std::map<AugmentationKind, std::optional<double>>& conf) {
    std::array<AugmentationKind, 3> perm = kAllKinds;
    std::sort(perm.begin(), perm.end());
    auto key = [&](AugmentationKind k) {
        const auto& c = conf.at(k);
        return std::make_tuple(c ? 0 : 1, c ? -*c : 0.0, kind_index(k));
    };
    std::vector<AugmentationKind> found;
    int count = 0;
    do {
        if (key(perm[0]) <= key(perm[1]) && key(perm[1]) <= key(perm[2])) {
            found.assign(perm.begin(), perm.end());
            ++count;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (count != 1) throw std::logic_error("ranking oracle found " + std::to_string(count) + " orders");
    return found;
}

inline pipeline::QueryClassification classification(AugmentationKind kind, std::optional<double> confidence,
                                                    const std::string& sample_id = "s") {
    pipeline::Augmentation aug{sample_id, kind, "aug", "digest"};
    pipeline::ReformulatedQuery q(sample_id, kind, std::string(display_name(kind)) + " question?", aug);
    return pipeline::QueryClassification{q, std::nullopt, confidence, "resp", false};
}

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double no_match_rate = 0.0;
    std::map<std::string, std::array<std::uint64_t, 3>> tp_fp_fn;
};

/// Direct counting over (gold, predicted) pairs. Classes in `labels` order;
/// the macro average covers the classes that appear in gold.
inline Metrics brute_force_metrics(const std::vector<std::pair<std::string, std::optional<std::string>>>& pairs,
                                   const LabelSet& labels) {
    Metrics m;
    std::uint64_t correct = 0, nomatch = 0;
    for (const auto& [g, p] : pairs) {
        if (p && *p == g) ++correct;
        if (!p) ++nomatch;
    }
    const double n = static_cast<double>(pairs.size());
    m.accuracy = pairs.empty() ? 0.0 : static_cast<double>(correct) / n;
    m.no_match_rate = pairs.empty() ? 0.0 : static_cast<double>(nomatch) / n;
    double sum = 0.0;
    std::size_t classes = 0;
    for (const auto& l : labels) {
        std::uint64_t tp = 0, fp = 0, fn = 0;
        bool in_gold = false;
        for (const auto& [g, p] : pairs) {
            const bool gold_is = g == l.name();
            const bool pred_is = p && *p == l.name();
            in_gold = in_gold || gold_is;
            if (gold_is && pred_is) ++tp;
            if (!gold_is && pred_is) ++fp;
            if (gold_is && !pred_is) ++fn;
        }
        m.tp_fp_fn[l.name()] = {tp, fp, fn};
        if (!in_gold) continue;
        const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        sum += prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
        ++classes;
    }
    m.macro_f1 = classes ? sum / static_cast<double>(classes) : 0.0;
    return m;
}

inline pipeline::Prediction baseline_prediction(const std::string& id, const std::string& dataset, LabelMatch label,
                                                std::optional<double> confidence = std::nullopt) {
    return pipeline::Prediction(id, dataset, pipeline::Mode::baseline(prompts::Baseline::ZeroShot), std::move(label),
                                confidence, std::nullopt, std::nullopt, {{"baseline", "p", "k", "r"}});
}

/// Expected calibration error straight from the definition: sum over
/// equal-width bins of |bin| / N * |accuracy - mean confidence|.
inline double direct_ece(const std::vector<std::pair<double, bool>>& items, std::size_t bins) {
    std::vector<double> conf(bins, 0.0);
    std::vector<double> hits(bins, 0.0);
    std::vector<double> count(bins, 0.0);
    for (const auto& [p, ok] : items) {
        std::size_t k = 0;
        while (k + 1 < bins && p >= static_cast<double>(k + 1) / static_cast<double>(bins)) ++k;
        conf[k] += p;
        hits[k] += ok ? 1.0 : 0.0;
        count[k] += 1.0;
    }
    double ece = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        if (count[k] == 0) continue;
        ece += count[k] / static_cast<double>(items.size()) * std::abs(hits[k] / count[k] - conf[k] / count[k]);
    }
    return ece;
}

}  // namespace fallacy::oracle
