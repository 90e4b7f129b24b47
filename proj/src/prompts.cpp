#include "fallacy/prompts.hpp"

#include <algorithm>

#include "fallacy/errors.hpp"
#include "fallacy/llm/sha256.hpp"
#include "fallacy/resources.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::prompts {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::AugmentOurs: return "augment-ours";
        case Family::AugmentPrior: return "augment-prior";
        case Family::QueryGen: return "query-gen";
        case Family::ClassifyWithQuery: return "classify-with-query";
        case Family::ClassifyRanked: return "classify-ranked";
        case Family::ZeroShot: return "zero-shot";
        case Family::ZCoT: return "zcot";
        case Family::DEF: return "def";
    }
    return "unknown";
}

std::string RenderedPrompt::digest() const { return llm::sha256_hex(text); }

namespace {

bool is_placeholder_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

// Calls on_text for literal runs and on_placeholder for each {NAME}.
template <typename OnText, typename OnPlaceholder>
void scan(std::string_view body, OnText on_text, OnPlaceholder on_placeholder) {
    std::size_t literal_start = 0;
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                on_text(body.substr(literal_start, i - literal_start));
                on_placeholder(std::string(body.substr(i + 1, j - i - 1)));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(body.substr(literal_start));
}

std::string template_resource_name(Family family, std::optional<AugmentationKind> kind) {
    auto kind_suffix = [&]() {
        if (!kind) throw std::invalid_argument("template family " + std::string(to_string(family)) + " needs a kind");
        return text::to_lower(display_name(*kind));
    };
    switch (family) {
        case Family::AugmentOurs: return "templates/augment_ours_" + kind_suffix() + ".tpl";
        case Family::AugmentPrior: return "templates/augment_prior_" + kind_suffix() + ".tpl";
        case Family::QueryGen: return "templates/query_" + kind_suffix() + ".tpl";
        case Family::ClassifyWithQuery: return "templates/classify_with_query.tpl";
        case Family::ClassifyRanked: return "templates/classify_ranked.tpl";
        case Family::ZeroShot: return "templates/zero_shot.tpl";
        case Family::ZCoT: return "templates/zcot.tpl";
        case Family::DEF: return "templates/def.tpl";
    }
    throw std::invalid_argument("unknown template family");
}

std::string strip_final_newline(std::string_view s) {
    if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

PromptTemplate::PromptTemplate(Family family, std::optional<AugmentationKind> kind, std::string body)
    : family_(family), kind_(kind), body_(std::move(body)) {}

PromptTemplate PromptTemplate::builtin(Family family, std::optional<AugmentationKind> kind) {
    // Template files end with a newline; the prompt itself does not.
    return PromptTemplate(family, kind, strip_final_newline(resources::get(template_resource_name(family, kind))));
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> out;
    scan(body_, [](std::string_view) {}, [&](const std::string& name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    });
    return out;
}

RenderedPrompt PromptTemplate::render(const Bindings& bindings) const {
    RenderedPrompt out{std::string{}, family_, {}};
    out.text.reserve(body_.size() * 2);
    scan(
        body_, [&](std::string_view literal) { out.text.append(literal); },
        [&](const std::string& name) {
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw TemplateError("unbound placeholder {" + name + "} in " + std::string(to_string(family_)) +
                                    " template");
            }
            out.text.append(it->second);
            out.provenance[name] = it->second;
        });
    return out;
}

PromptTemplate PromptTemplate::without_line_containing(std::string_view marker) const {
    std::vector<std::string> kept;
    for (auto& line : text::split(body_, '\n')) {
        if (line.find(marker) == std::string::npos) kept.push_back(std::move(line));
    }
    return PromptTemplate(family_, kind_, text::join(kept, "\n"));
}

std::string comma_list(const std::vector<FallacyLabel>& labels) {
    std::vector<std::string> names;
    for (const auto& l : labels) names.push_back(l.name());
    return text::join(names, ", ");
}

std::string quoted_list(const std::vector<FallacyLabel>& labels, std::string_view conjunction) {
    std::string out;
    const std::size_t n = labels.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            if (n == 2) {
                out += " ";
            } else {
                out += ", ";
            }
            if (i == n - 1) {
                out.append(conjunction);
                out += " ";
            }
        }
        out += "'" + labels[i].name() + "'";
    }
    return out;
}

Definitions::Definitions(std::map<std::string, std::string> by_name) {
    for (auto& [name, def] : by_name) by_name_[text::to_lower(text::trim(name))] = std::move(def);
}

Definitions Definitions::parse_tsv(std::string_view tsv) {
    std::map<std::string, std::string> entries;
    for (const auto& raw : text::split(tsv, '\n')) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw std::invalid_argument("definition line lacks a tab: " + std::string(line));
        entries.emplace(std::string(text::trim(line.substr(0, tab))), std::string(text::trim(line.substr(tab + 1))));
    }
    return Definitions(std::move(entries));
}

std::optional<Definitions> Definitions::builtin(std::string_view dataset_id) {
    auto tsv = resources::find("definitions/" + std::string(dataset_id) + ".tsv");
    if (!tsv) return std::nullopt;
    return parse_tsv(*tsv);
}

std::optional<std::string> Definitions::find(const FallacyLabel& label) const {
    auto it = by_name_.find(text::to_lower(label.name()));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

RenderedPrompt build_augmentation_prompt(const Sample& sample, AugmentationKind kind, const LabelSet& labels,
                                         AugmentFamily family) {
    if (family == AugmentFamily::Prior) {
        return PromptTemplate::builtin(Family::AugmentPrior, kind).render({{"TEXT", sample.text}});
    }
    return PromptTemplate::builtin(Family::AugmentOurs, kind)
        .render({{"TEXT", sample.text}, {"FALLACY_CLASSES", comma_list(labels.labels())}});
}

RenderedPrompt build_query_prompt(const Sample& sample, AugmentationKind kind, std::string_view augmentation) {
    return PromptTemplate::builtin(Family::QueryGen, kind)
        .render({{"TEXT", sample.text}, {"AUGMENTATION", std::string(augmentation)}});
}

RenderedPrompt build_classification_prompt(const Sample& sample, std::string_view query, const LabelSet& labels,
                                           bool concise) {
    auto tpl = PromptTemplate::builtin(Family::ClassifyWithQuery);
    if (!concise) tpl = tpl.without_line_containing("{N_LABELS}");
    Bindings b{{"TEXT", sample.text},
               {"QUERY", std::string(query)},
               {"FALLACY_CLASSES", quoted_list(labels.labels(), "and")}};
    if (concise) b["N_LABELS"] = std::to_string(labels.size());
    return tpl.render(b);
}

std::string ranking_line(const std::vector<AugmentationKind>& order) {
    std::vector<std::string> names;
    for (auto kind : order) names.push_back(std::string(display_name(kind)) + " Query");
    return text::join(names, ", ");
}

RenderedPrompt build_ranked_prompt(const Sample& sample, const RankingInput& input, const LabelSet& labels) {
    for (auto kind : kAllKinds) {
        if (!input.queries.contains(kind)) {
            throw RankingIncomplete("ranked prompt lacks the " + std::string(display_name(kind)) + " query");
        }
    }
    if (input.queries.size() != kAllKinds.size()) throw RankingIncomplete("ranked prompt has unexpected queries");
    auto tpl = PromptTemplate::builtin(Family::ClassifyRanked);
    Bindings b{{"TEXT", sample.text},
               {"FALLACY_CLASSES", quoted_list(labels.labels(), "or")},
               {"N_LABELS", std::to_string(labels.size())},
               {"QUERY_CG", input.queries.at(AugmentationKind::Counterargument)},
               {"QUERY_EX", input.queries.at(AugmentationKind::Explanation)},
               {"QUERY_GO", input.queries.at(AugmentationKind::Goal)}};
    if (input.order) {
        auto sorted = *input.order;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != std::vector<AugmentationKind>(kAllKinds.begin(), kAllKinds.end())) {
            throw RankingIncomplete("ranking order is not a permutation of CG, EX, GO");
        }
        b["RANKING"] = ranking_line(*input.order);
    } else {
        tpl = tpl.without_line_containing("{RANKING}");
    }
    return tpl.render(b);
}

RenderedPrompt build_baseline_prompt(const Sample& sample, const LabelSet& labels, Baseline mode,
                                     const Definitions* definitions) {
    Bindings b{{"TEXT", sample.text}, {"FALLACY_CLASSES", quoted_list(labels.labels(), "and")}};
    switch (mode) {
        case Baseline::ZeroShot: return PromptTemplate::builtin(Family::ZeroShot).render(b);
        case Baseline::ZCoT: return PromptTemplate::builtin(Family::ZCoT).render(b);
        case Baseline::DEF: break;
    }
    std::vector<std::string> lines;
    int number = 1;
    for (const auto& label : labels.fallacies_only()) {
        auto def = definitions ? definitions->find(label) : std::nullopt;
        if (!def) throw MissingDefinition(label.name());
        lines.push_back(std::to_string(number++) + ". " + label.name() + ": " + *def);
    }
    b["DEFINITIONS"] = text::join(lines, "\n");
    return PromptTemplate::builtin(Family::DEF).render(b);
}

}  // namespace fallacy::prompts
