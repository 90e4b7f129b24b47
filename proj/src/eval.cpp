#include "fallacy/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fallacy/csv.hpp"
#include "fallacy/errors.hpp"

namespace fallacy::eval {

using nlohmann::json;

void ConfusionMatrix::add(const FallacyLabel& gold, const LabelMatch& predicted, std::uint64_t n) {
    Column col = predicted ? Column(predicted->name()) : std::nullopt;
    rows_[gold.name()][col] += n;
    total_ += n;
}

std::uint64_t ConfusionMatrix::at(const std::string& gold, const Column& predicted) const {
    auto r = rows_.find(gold);
    if (r == rows_.end()) return 0;
    auto c = r->second.find(predicted);
    return c == r->second.end() ? 0 : c->second;
}

std::uint64_t ConfusionMatrix::true_positives(const std::string& label) const { return at(label, label); }

std::uint64_t ConfusionMatrix::support(const std::string& label) const {
    auto r = rows_.find(label);
    if (r == rows_.end()) return 0;
    std::uint64_t n = 0;
    for (const auto& [col, count] : r->second) n += count;
    return n;
}

std::uint64_t ConfusionMatrix::predicted_count(const Column& label) const {
    std::uint64_t n = 0;
    for (const auto& [gold, cols] : rows_) {
        auto c = cols.find(label);
        if (c != cols.end()) n += c->second;
    }
    return n;
}

std::uint64_t ConfusionMatrix::correct() const {
    std::uint64_t n = 0;
    for (const auto& [gold, cols] : rows_) n += at(gold, gold);
    return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    for (const auto& [gold, cols] : other.rows_) {
        for (const auto& [col, count] : cols) rows_[gold][col] += count;
    }
    total_ += other.total_;
    return *this;
}

GoldMap gold_map(const std::vector<Sample>& samples) {
    GoldMap out;
    for (const auto& s : samples) out.emplace(s.id, s.gold_label);
    return out;
}

namespace {

double ratio(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

EvalReport report_from(const ConfusionMatrix& cm, const LabelSet& labels) {
    EvalReport r;
    r.dataset_id = labels.dataset_id();
    r.confusion = cm;
    r.samples = cm.total();
    r.accuracy = ratio(cm.correct(), cm.total());
    // Every sample gets exactly one prediction (NoMatch included), so micro
    // precision and recall both reduce to correct / total.
    r.micro_f1 = r.accuracy;
    r.no_match_rate = ratio(cm.predicted_count(std::nullopt), cm.total());

    std::set<std::string> present;
    for (const auto& [gold, cols] : cm.rows()) {
        present.insert(gold);
        for (const auto& [col, n] : cols) {
            if (col && n) present.insert(*col);
        }
    }
    std::vector<std::string> order;
    for (const auto& l : labels) {
        if (present.erase(l.name())) order.push_back(l.name());
    }
    order.insert(order.end(), present.begin(), present.end());

    double sum = 0.0, sum_wo = 0.0;
    std::size_t n = 0, n_wo = 0;
    bool saw_no_fallacy = false;
    for (const auto& name : order) {
        ClassMetrics m;
        m.label = name;
        m.support = cm.support(name);
        m.precision = ratio(cm.true_positives(name), cm.predicted_count(name));
        m.recall = ratio(cm.true_positives(name), m.support);
        m.f1 = harmonic(m.precision, m.recall);
        if (m.support > 0) {
            sum += m.f1;
            ++n;
            if (is_no_fallacy(FallacyLabel(name))) {
                saw_no_fallacy = true;
            } else {
                sum_wo += m.f1;
                ++n_wo;
            }
        }
        r.per_class.push_back(std::move(m));
    }
    r.macro_f1 = n ? sum / static_cast<double>(n) : 0.0;
    if (saw_no_fallacy) r.macro_f1_without_no_fallacy = n_wo ? sum_wo / static_cast<double>(n_wo) : 0.0;
    return r;
}

EvalReport score(const std::vector<pipeline::Prediction>& predictions, const GoldMap& gold, const LabelSet& labels,
                 std::optional<std::uint64_t> split_seed) {
    ConfusionMatrix cm;
    std::set<std::string> modes;
    std::size_t degraded = 0;
    for (const auto& p : predictions) {
        auto g = gold.find(p.sample_id());
        if (g == gold.end()) throw MissingGold("no gold label for sample " + p.sample_id());
        cm.add(g->second, p.label());
        modes.insert(p.mode().to_string());
        if (p.degraded()) ++degraded;
    }
    auto r = report_from(cm, labels);
    std::vector<std::string> mode_list(modes.begin(), modes.end());
    r.mode = mode_list.size() == 1 ? mode_list.front() : "mixed";
    r.split_seed = split_seed;
    r.degraded = degraded;
    return r;
}

std::vector<ScoredItem> final_items(const std::vector<pipeline::Prediction>& predictions) {
    std::vector<ScoredItem> out;
    for (const auto& p : predictions) out.push_back({p.sample_id(), p.label(), p.confidence()});
    return out;
}

std::vector<ScoredItem> query_items(const std::vector<pipeline::Prediction>& predictions, AugmentationKind kind) {
    std::vector<ScoredItem> out;
    for (const auto& p : predictions) {
        const pipeline::QueryClassification* c = nullptr;
        if (p.ranked()) {
            c = &p.ranked()->at(kind);
        } else if (p.single() && p.single()->kind() == kind) {
            c = &*p.single();
        }
        if (c) out.push_back({p.sample_id(), c->predicted, c->confidence});
    }
    return out;
}

double to_probability(double logprob) { return std::clamp(std::exp(logprob), 0.0, 1.0); }

namespace {

bool is_correct(const ScoredItem& item, const GoldMap& gold) {
    auto g = gold.find(item.sample_id);
    if (g == gold.end()) throw MissingGold("no gold label for sample " + item.sample_id);
    return item.predicted && *item.predicted == g->second;
}

}  // namespace

BandReport f1_by_confidence(const std::vector<ScoredItem>& items, const GoldMap& gold,
                            const std::vector<double>& band_edges) {
    if (band_edges.size() < 2) throw std::invalid_argument("need at least two band edges");
    for (std::size_t i = 0; i < band_edges.size(); ++i) {
        if (band_edges[i] < 0.0 || band_edges[i] > 1.0) throw std::invalid_argument("band edges must lie in [0, 1]");
        if (i && band_edges[i] <= band_edges[i - 1]) throw std::invalid_argument("band edges must increase");
    }
    BandReport out;
    std::vector<std::size_t> correct(band_edges.size() - 1, 0);
    for (std::size_t i = 0; i + 1 < band_edges.size(); ++i) out.bands.push_back({band_edges[i], band_edges[i + 1], 0, {}});
    for (const auto& item : items) {
        const bool ok = is_correct(item, gold);
        if (!item.confidence) {
            ++out.absent;
            continue;
        }
        const double p = to_probability(*item.confidence);
        for (std::size_t b = 0; b < out.bands.size(); ++b) {
            const bool last = b + 1 == out.bands.size();
            if (p >= out.bands[b].lower && (p < out.bands[b].upper || (last && p <= out.bands[b].upper))) {
                ++out.bands[b].count;
                if (ok) ++correct[b];
                break;
            }
        }
    }
    for (std::size_t b = 0; b < out.bands.size(); ++b) {
        if (out.bands[b].count) out.bands[b].micro_f1 = ratio(correct[b], out.bands[b].count);
    }
    return out;
}

std::size_t bin_index(double p, std::size_t n_bins) {
    const double n = static_cast<double>(n_bins);
    auto k = static_cast<std::size_t>(std::floor(std::clamp(p, 0.0, 1.0) * n));
    // floor(p * n) can land one bin off when p sits on a boundary that is
    // not exactly representable; compare against the same k / n the bin
    // bounds are built from.
    if (k > 0 && static_cast<double>(k) / n > p) --k;
    if (k + 1 < n_bins && static_cast<double>(k + 1) / n <= p) ++k;
    return std::min(k, n_bins - 1);
}

Reliability reliability(const std::vector<ScoredItem>& items, const GoldMap& gold, std::size_t n_bins) {
    if (n_bins == 0) throw std::invalid_argument("n_bins must be positive");
    Reliability out;
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<std::size_t> correct(n_bins, 0);
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.bins.push_back({static_cast<double>(k) / static_cast<double>(n_bins),
                            static_cast<double>(k + 1) / static_cast<double>(n_bins), 0, 0.0, 0.0});
    }
    for (const auto& item : items) {
        const bool ok = is_correct(item, gold);
        if (!item.confidence) {
            ++out.absent;
            continue;
        }
        const double p = to_probability(*item.confidence);
        const auto k = bin_index(p, n_bins);
        ++out.bins[k].count;
        conf_sum[k] += p;
        if (ok) ++correct[k];
        ++out.scored;
    }
    for (std::size_t k = 0; k < n_bins; ++k) {
        auto& b = out.bins[k];
        if (!b.count) continue;
        b.mean_confidence = conf_sum[k] / static_cast<double>(b.count);
        b.empirical_accuracy = ratio(correct[k], b.count);
        out.ece += static_cast<double>(b.count) / static_cast<double>(out.scored) *
                   std::abs(b.empirical_accuracy - b.mean_confidence);
    }
    return out;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

json to_json(const EvalReport& r) {
    json per_class = json::array();
    for (const auto& m : r.per_class) {
        per_class.push_back(
            {{"label", m.label}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
    }
    json confusion = json::object();
    for (const auto& [gold, cols] : r.confusion.rows()) {
        json row = json::object();
        for (const auto& [col, n] : cols) row[col ? *col : std::string("<no match>")] = n;
        confusion[gold] = row;
    }
    return json{{"dataset", r.dataset_id},
                {"mode", r.mode},
                {"accuracy", r.accuracy},
                {"macro_f1", r.macro_f1},
                {"micro_f1", r.micro_f1},
                {"macro_f1_without_no_fallacy", opt(r.macro_f1_without_no_fallacy)},
                {"no_match_rate", r.no_match_rate},
                {"split_seed", r.split_seed ? json(*r.split_seed) : json(nullptr)},
                {"samples", r.samples},
                {"degraded", r.degraded},
                {"per_class", per_class},
                {"confusion", confusion}};
}

json to_json(const BandReport& r) {
    json bands = json::array();
    for (const auto& b : r.bands) {
        bands.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}, {"micro_f1", opt(b.micro_f1)}});
    }
    return json{{"bands", bands}, {"absent", r.absent}};
}

json to_json(const Reliability& r) {
    json bins = json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"empirical_accuracy", b.empirical_accuracy}});
    }
    return json{{"bins", bins}, {"ece", r.ece}, {"scored", r.scored}, {"absent", r.absent}};
}

std::string csv_header() {
    return "dataset,mode,samples,accuracy,macro_f1,micro_f1,macro_f1_without_no_fallacy,no_match_rate,split_seed";
}

std::string csv_row(const EvalReport& r) {
    return csv::format_row({r.dataset_id, r.mode, std::to_string(r.samples), num(r.accuracy), num(r.macro_f1),
                            num(r.micro_f1),
                            r.macro_f1_without_no_fallacy ? num(*r.macro_f1_without_no_fallacy) : std::string{},
                            num(r.no_match_rate), r.split_seed ? std::to_string(*r.split_seed) : std::string{}});
}

std::string bins_csv(const Reliability& r) {
    std::ostringstream out;
    out << "lower,upper,count,mean_confidence,empirical_accuracy\n";
    for (const auto& b : r.bins) {
        out << num(b.lower) << ',' << num(b.upper) << ',' << b.count << ',' << num(b.mean_confidence) << ','
            << num(b.empirical_accuracy) << '\n';
    }
    return out.str();
}

}  // namespace fallacy::eval
