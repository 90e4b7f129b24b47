#include "fallacy/core_types.hpp"

#include <algorithm>

#include "fallacy/text_util.hpp"

namespace fallacy {

FallacyLabel::FallacyLabel(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw std::invalid_argument("fallacy label name is empty");
    if (text::trim(name_).size() != name_.size()) {
        throw std::invalid_argument("fallacy label name has surrounding whitespace: '" + name_ + "'");
    }
}

LabelSet::LabelSet(std::string dataset_id, std::vector<FallacyLabel> labels)
    : dataset_id_(std::move(dataset_id)), labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (text::iequals(labels_[i].name(), labels_[j].name())) {
                throw std::invalid_argument("duplicate label in set " + dataset_id_ + ": " + labels_[i].name());
            }
        }
    }
}

bool LabelSet::contains(const FallacyLabel& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::optional<FallacyLabel> LabelSet::find(std::string_view name) const {
    for (const auto& label : labels_) {
        if (text::iequals(label.name(), name)) return label;
    }
    return std::nullopt;
}

std::optional<std::size_t> LabelSet::index_of(const FallacyLabel& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<FallacyLabel> LabelSet::fallacies_only() const {
    std::vector<FallacyLabel> out;
    std::copy_if(labels_.begin(), labels_.end(), std::back_inserter(out),
                 [](const FallacyLabel& l) { return !is_no_fallacy(l); });
    return out;
}

bool is_no_fallacy(const FallacyLabel& label) {
    std::string folded = text::to_lower(label.name());
    std::replace(folded.begin(), folded.end(), '-', ' ');
    std::replace(folded.begin(), folded.end(), '_', ' ');
    folded = text::collapse_whitespace(folded);
    return folded == "no fallacy" || folded == "none";
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "test";
}

std::optional<Split> parse_split(std::string_view text) {
    auto lowered = text::to_lower(text::trim(text));
    if (lowered == "train") return Split::Train;
    if (lowered == "dev" || lowered == "validation" || lowered == "val") return Split::Dev;
    if (lowered == "test") return Split::Test;
    return std::nullopt;
}

Sample make_sample(std::string id, std::string text, FallacyLabel gold, const LabelSet& labels, Split split) {
    if (id.empty()) throw std::invalid_argument("sample id is empty");
    if (text::collapse_whitespace(text).empty()) throw std::invalid_argument("sample " + id + " has empty text");
    if (!labels.contains(gold)) {
        throw std::invalid_argument("sample " + id + " label '" + gold.name() + "' not in label set of " +
                                    labels.dataset_id());
    }
    return Sample{std::move(id), std::move(text), std::move(gold), labels.dataset_id(), split};
}

std::string_view short_name(AugmentationKind kind) {
    switch (kind) {
        case AugmentationKind::Counterargument: return "CG";
        case AugmentationKind::Explanation: return "EX";
        case AugmentationKind::Goal: return "GO";
    }
    return "CG";
}

std::string_view display_name(AugmentationKind kind) {
    switch (kind) {
        case AugmentationKind::Counterargument: return "Counterargument";
        case AugmentationKind::Explanation: return "Explanation";
        case AugmentationKind::Goal: return "Goal";
    }
    return "Counterargument";
}

std::optional<AugmentationKind> parse_kind(std::string_view text) {
    auto t = text::trim(text);
    for (auto kind : kAllKinds) {
        if (text::iequals(t, short_name(kind)) || text::iequals(t, display_name(kind))) return kind;
    }
    return std::nullopt;
}

namespace {

bool strip_prefix(std::string_view& s, std::string_view p) {
    if (s.substr(0, p.size()) != p) return false;
    s.remove_prefix(p.size());
    return true;
}

bool strip_suffix(std::string_view& s, std::string_view p) {
    if (s.size() < p.size() || s.substr(s.size() - p.size()) != p) return false;
    s.remove_suffix(p.size());
    return true;
}

constexpr std::array<std::string_view, 8> kDecorations{
    "\"", "'", "`", ".", "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D"};

std::string normalize_for_exact(std::string_view raw) {
    std::string_view s = text::trim(raw);
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        for (auto d : kDecorations) {
            changed |= strip_prefix(s, d);
            changed |= strip_suffix(s, d);
        }
        auto trimmed = text::trim(s);
        changed |= trimmed.size() != s.size();
        s = trimmed;
    }
    return text::to_lower(text::collapse_whitespace(s));
}

bool occurs_as_phrase(std::string_view haystack, std::string_view phrase) {
    std::size_t pos = 0;
    while ((pos = text::ifind(haystack, phrase, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !text::is_word_char(haystack[pos - 1]);
        std::size_t end = pos + phrase.size();
        bool right_ok = end == haystack.size() || !text::is_word_char(haystack[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

LabelResolution resolve_label(std::string_view raw, const LabelSet& labels) {
    LabelResolution out;
    const std::string normalized = normalize_for_exact(raw);
    const std::string collapsed = text::collapse_whitespace(raw);
    for (const auto& label : labels) {
        if (occurs_as_phrase(collapsed, label.name())) out.mentioned.push_back(label);
    }
    for (const auto& label : labels) {
        if (text::to_lower(label.name()) == normalized) {
            out.label = label;
            out.kind = MatchKind::Exact;
            return out;
        }
    }
    if (out.mentioned.size() == 1) {
        out.label = out.mentioned.front();
        out.kind = MatchKind::Phrase;
    }
    return out;
}

LabelMatch canonicalize_label(std::string_view raw, const LabelSet& labels) {
    return resolve_label(raw, labels).label;
}

}  // namespace fallacy
