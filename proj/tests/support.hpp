#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fallacy/core_types.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/llm/mock_backend.hpp"
#include "fallacy/pipeline.hpp"
#include "fallacy/prompts.hpp"

namespace fallacy::testing {

namespace fs = std::filesystem;

inline const std::string kStarbucks = "Annie must like Starbucks because all girls like Starbucks.";

inline const std::string kCgAug =
    "Not all girls like Starbucks, as personal preferences vary among individuals. Even if Annie is a girl, it "
    "does not automatically mean that she likes Starbucks. She may prefer a different type of coffee or may not "
    "like coffee at all. It is not fair to make assumptions about someone based on their gender.";
inline const std::string kExAug =
    "This text suggests a generalization about girls and their preferences for Starbucks, assuming that Annie, as "
    "a girl, must also like Starbucks without evidence. This could be seen as stereotyping, making unfounded "
    "assumptions based on gender, reinforcing harmful stereotypes.";
inline const std::string kGoAug =
    "The goal is to make a generalization about girls liking Starbucks based on the assumption that Annie is a girl.";

inline const std::string kCgQuery = "How does the counterargument challenge the assumption that all girls like Starbucks?";
inline const std::string kExQuery =
    "How does this text perpetuate harmful gender stereotypes and restrict individual expression?";
inline const std::string kGoQuery =
    "What does this text reveal about the speaker's attitude towards girls and their preferences?";

inline LabelSet five_labels(const std::string& dataset = "ARGOTARIO") {
    return LabelSet(dataset, {FallacyLabel("Appeal to Emotion"), FallacyLabel("Faulty Generalization"),
                              FallacyLabel("Red Herring"), FallacyLabel("Ad Hominem"),
                              FallacyLabel("Irrelevant Authority")});
}

inline Sample starbucks(const LabelSet& labels = five_labels()) {
    return make_sample("starbucks", kStarbucks, FallacyLabel("Faulty Generalization"), labels, Split::Test);
}

inline std::string test_dir() { return FALLACY_TEST_DIR; }

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

/// Golden file minus its final newline.
inline std::string golden(const std::string& name) {
    auto s = read_file(fs::path(test_dir()) / "golden" / name);
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("fallacy-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Splits on spaces, keeping each space at the front of the next token, and
/// spreads `logprobs` over the tokens (the last value repeats).
inline std::vector<llm::TokenLogProb> tokens(const std::string& text, std::vector<double> logprobs) {
    std::vector<llm::TokenLogProb> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ') {
            out.push_back({text.substr(start, i - start), 0.0});
            start = i;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].logprob = logprobs.empty() ? 0.0 : logprobs[std::min(i, logprobs.size() - 1)];
    }
    return out;
}

inline llm::MockRule exact(std::string prompt, std::string text,
                           std::optional<std::vector<llm::TokenLogProb>> toks = std::nullopt) {
    llm::MockRule r;
    r.pattern = std::move(prompt);
    r.text = std::move(text);
    r.tokens = std::move(toks);
    return r;
}

inline llm::MockRule prefix(std::string p, std::string text,
                            std::optional<std::vector<llm::TokenLogProb>> toks = std::nullopt) {
    auto r = exact(std::move(p), std::move(text), std::move(toks));
    r.prefix = true;
    return r;
}

/// Everything the mock needs to answer one sample through every mode.
struct SampleScript {
    std::map<AugmentationKind, std::string> augmentations;
    std::map<AugmentationKind, std::string> queries;
    /// Classifier answers per query kind: text and one logprob per token.
    std::map<AugmentationKind, std::pair<std::string, std::vector<double>>> answers;
    std::pair<std::string, std::vector<double>> final_answer;
    std::pair<std::string, std::vector<double>> baseline_answer;
};

inline SampleScript starbucks_script() {
    SampleScript s;
    s.augmentations = {{AugmentationKind::Counterargument, kCgAug},
                       {AugmentationKind::Explanation, kExAug},
                       {AugmentationKind::Goal, kGoAug}};
    s.queries = {{AugmentationKind::Counterargument, kCgQuery},
                 {AugmentationKind::Explanation, kExQuery},
                 {AugmentationKind::Goal, kGoQuery}};
    s.answers = {{AugmentationKind::Counterargument, {"Faulty Generalization", {-1.0, -1.0}}},
                 {AugmentationKind::Explanation, {"Faulty Generalization", {-0.05, -0.05}}},
                 {AugmentationKind::Goal, {"Faulty Generalization", {-0.25, -0.25}}}};
    s.final_answer = {"Faulty Generalization", {-0.01, -0.02}};
    s.baseline_answer = {"Red Herring", {-0.4, -0.3}};
    return s;
}

/// Exact rules for every prompt the engine sends for `x`, plus one prefix
/// rule covering the final prompt under every ranking variant.
inline std::vector<llm::MockRule> rules_for(const Sample& x, const LabelSet& labels, const SampleScript& s,
                                           const pipeline::EngineConfig& config = {}) {
    std::vector<llm::MockRule> rules;
    prompts::RankingInput ranking;
    for (auto kind : kAllKinds) {
        const auto& aug = s.augmentations.at(kind);
        const auto& q = s.queries.at(kind);
        const auto& [answer, lps] = s.answers.at(kind);
        rules.push_back(exact(prompts::build_augmentation_prompt(x, kind, labels, config.augment_family).text, aug));
        rules.push_back(exact(prompts::build_query_prompt(x, kind, aug).text, q));
        rules.push_back(exact(prompts::build_classification_prompt(x, q, labels, config.concise).text, answer,
                              tokens(answer, lps)));
        ranking.queries[kind] = q;
    }
    auto unranked = prompts::build_ranked_prompt(x, ranking, labels).text;
    const std::string tail = "Label:";
    unranked.resize(unranked.size() - tail.size());
    rules.push_back(prefix(unranked, s.final_answer.first, tokens(s.final_answer.first, s.final_answer.second)));

    auto base_toks = tokens(s.baseline_answer.first, s.baseline_answer.second);
    for (auto b : {prompts::Baseline::ZeroShot, prompts::Baseline::ZCoT, prompts::Baseline::DEF}) {
        try {
            const prompts::Definitions* defs = nullptr;
            std::optional<prompts::Definitions> builtin;
            if (config.definitions) {
                defs = &*config.definitions;
            } else if ((builtin = prompts::Definitions::builtin(x.dataset_id))) {
                defs = &*builtin;
            }
            rules.push_back(
                exact(prompts::build_baseline_prompt(x, labels, b, defs).text, s.baseline_answer.first, base_toks));
        } catch (const MissingDefinition&) {
        }
    }
    return rules;
}

/// A synthetic script for sample number `i`: distinct texts, a label that
/// depends on i and confidences that vary with i.
inline SampleScript synthetic_script(std::size_t i, const LabelSet& labels) {
    SampleScript s;
    const auto n = std::to_string(i);
    const double base = -0.1 * static_cast<double>(i % 7 + 1);
    int k = 0;
    for (auto kind : kAllKinds) {
        const std::string tag(short_name(kind));
        s.augmentations[kind] = "Augmentation " + tag + " for sample " + n + ".";
        s.queries[kind] = "Which part of sample " + n + " does the " + tag + " view question?";
        const auto& label = labels[(i + static_cast<std::size_t>(k)) % labels.size()].name();
        s.answers[kind] = {label, {base * (k + 1)}};
        ++k;
    }
    s.final_answer = {labels[i % labels.size()].name(), {base / 2}};
    s.baseline_answer = {labels[(i + 1) % labels.size()].name(), {base}};
    return s;
}

inline nlohmann::json script_json(const std::vector<llm::MockRule>& rules) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rules) arr.push_back(llm::to_json(r));
    return nlohmann::json{{"rules", arr}};
}

inline void write_script(const fs::path& p, const std::vector<llm::MockRule>& rules) {
    write_file(p, script_json(rules).dump(2));
}

/// Canonical dataset directory as `ingest` would write it.
inline void write_canonical_fixture(const fs::path& dir, const LabelSet& labels, const std::vector<Sample>& samples,
                                    std::uint64_t seed = 0) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& l : labels) names.push_back(l.name());
    write_file(dir / "dataset.json", nlohmann::json{{"dataset", labels.dataset_id()}, {"labels", names}, {"seed", seed}}.dump());
    std::string lines;
    for (const auto& s : samples) {
        lines += nlohmann::json{{"id", s.id}, {"text", s.text}, {"label", s.gold_label.name()},
                                {"split", std::string(to_string(s.split))}, {"dataset", s.dataset_id}}
                     .dump() +
                 "\n";
    }
    write_file(dir / "samples.jsonl", lines);
}

/// `n` synthetic test samples over `labels`.
inline std::vector<Sample> synthetic_samples(std::size_t n, const LabelSet& labels) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(make_sample(labels.dataset_id() + "-" + std::to_string(i),
                                  "Synthetic argument number " + std::to_string(i) + " about coffee and people.",
                                  labels[(i * 3) % labels.size()], labels, Split::Test));
    }
    return out;
}

inline std::vector<llm::MockRule> synthetic_rules(const std::vector<Sample>& samples, const LabelSet& labels,
                                                  const pipeline::EngineConfig& config = {}) {
    std::vector<llm::MockRule> rules;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto r = rules_for(samples[i], labels, synthetic_script(i, labels), config);
        rules.insert(rules.end(), r.begin(), r.end());
    }
    return rules;
}

}  // namespace fallacy::testing
