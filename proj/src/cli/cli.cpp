#include "fallacy/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>

#include "fallacy/ablation.hpp"
#include "fallacy/datasets.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/eval.hpp"
#include "fallacy/llm/response_cache.hpp"
#include "fallacy/parallel.hpp"
#include "fallacy/run_store.hpp"
#include "fallacy/svg.hpp"
#include "fallacy/text_util.hpp"

namespace fallacy::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::RankingVariant;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted = true; }

struct Interrupted : Error {
    Interrupted() : Error("interrupted") {}
};

// Restores the previous SIGINT disposition on scope exit.
class SigintGuard {
public:
    SigintGuard() {
        g_interrupted = false;
        previous_ = std::signal(SIGINT, on_sigint);
    }
    ~SigintGuard() { std::signal(SIGINT, previous_); }

private:
    void (*previous_)(int);
};

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

std::string sanitize(std::string s) {
    for (auto& c : s) {
        if (c == ':' || c == '/' || c == ' ') c = '-';
    }
    return s;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> out;
    auto num = [&](std::string_view s) {
        auto t = std::string(text::trim(s));
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("bad seed list '" + spec + "' (expected e.g. 0..4 or 0,1,2)");
        }
        return static_cast<std::uint64_t>(std::stoull(t));
    };
    if (auto dots = spec.find(".."); dots != std::string::npos) {
        auto lo = num(std::string_view(spec).substr(0, dots));
        auto hi = num(std::string_view(spec).substr(dots + 2));
        if (hi < lo) throw ConfigError("empty seed range '" + spec + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    for (const auto& part : text::split(spec, ',')) out.push_back(num(part));
    return out;
}

std::vector<double> parse_ratios(const std::string& spec) {
    std::vector<double> out;
    for (const auto& part : text::split(spec, ',')) {
        try {
            std::size_t used = 0;
            const auto t = std::string(text::trim(part));
            double v = std::stod(t, &used);
            if (used != t.size() || v < 0.0 || v > 1.0) throw std::invalid_argument(t);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad ratio list '" + spec + "' (expected values in [0, 1], e.g. 0,0.5,1)");
        }
    }
    return out;
}

// Flags that override config file values. Only options given on the
// command line are applied.
struct RunFlags {
    std::optional<std::string> config, data_dir, split, mode, generator_model, classifier_model, backend, mock_script,
        base_url, api, cache_dir, out_dir, run_id, argmax, definitions, augment;
    std::optional<int> concurrency, retries, timeout_seconds, generation_max_tokens, classification_max_tokens;
    std::optional<std::size_t> limit;
    bool no_concise = false;
    bool parallel_chains = false;

    void bind(CLI::App* app, bool with_data) {
        app->add_option("--config", config, "JSON config file; flags override it");
        if (with_data) app->add_option("--data", data_dir, "canonical dataset directory (from ingest)");
        app->add_option("--split", split, "train, dev or test");
        app->add_option("--mode", mode,
                        "prompt-ranking, single-query:<CG|EX|GO>, zero-shot, zcot, def, ranked-none, ranked-random:<seed>");
        app->add_option("--generator-model", generator_model, "model for augmentations and queries");
        app->add_option("--classifier-model", classifier_model, "model for classification");
        app->add_option("--backend", backend, "mock or http");
        app->add_option("--mock-script", mock_script, "scripted responses for the mock backend");
        app->add_option("--base-url", base_url, "OpenAI-compatible endpoint");
        app->add_option("--api", api, "auto, chat or completions");
        app->add_option("--cache-dir", cache_dir, "response cache directory");
        app->add_option("--out", out_dir, "output root");
        app->add_option("--run-id", run_id, "run name (default derived from dataset, mode and split)");
        app->add_option("--argmax", argmax, "final label choice: greedy or per-label");
        app->add_option("--definitions", definitions, "label<TAB>definition file for DEF");
        app->add_option("--augment", augment, "augmentation wording: ours or prior");
        app->add_option("--concurrency", concurrency, "requests in flight and samples in progress");
        app->add_option("--retries", retries, "attempts per request");
        app->add_option("--timeout", timeout_seconds, "request timeout in seconds");
        app->add_option("--generation-max-tokens", generation_max_tokens);
        app->add_option("--classification-max-tokens", classification_max_tokens);
        app->add_option("--limit", limit, "only the first N samples of the split");
        app->add_flag("--no-concise", no_concise, "drop the one-label instruction from classification prompts");
        app->add_flag("--parallel-chains", parallel_chains, "run the three query chains of a sample concurrently");
    }

    RunConfig resolve() const {
        RunConfig c;
        if (config) c = load_config_file(*config, c);
        auto set = [](auto& field, const auto& flag) {
            if (flag) field = *flag;
        };
        set(c.data_dir, data_dir);
        set(c.split, split);
        set(c.mode, mode);
        set(c.generator_model, generator_model);
        set(c.classifier_model, classifier_model);
        set(c.backend, backend);
        set(c.mock_script, mock_script);
        set(c.base_url, base_url);
        set(c.api, api);
        set(c.cache_dir, cache_dir);
        set(c.out_dir, out_dir);
        set(c.run_id, run_id);
        set(c.argmax, argmax);
        set(c.definitions, definitions);
        set(c.augment, augment);
        set(c.concurrency, concurrency);
        set(c.retries, retries);
        set(c.timeout_seconds, timeout_seconds);
        set(c.generation_max_tokens, generation_max_tokens);
        set(c.classification_max_tokens, classification_max_tokens);
        set(c.limit, limit);
        if (no_concise) c.concise = false;
        if (parallel_chains) c.parallel_chains = true;
        return c;
    }
};

std::vector<Sample> split_samples(const datasets::CanonicalDataset& ds, Split split, std::size_t limit) {
    std::vector<Sample> out;
    for (const auto& s : ds.samples) {
        if (s.split != split) continue;
        out.push_back(s);
        if (limit && out.size() >= limit) break;
    }
    return out;
}

// DEF needs every fallacy class defined; catch that before any call.
void check_definitions(const pipeline::EngineConfig& e, const datasets::CanonicalDataset& ds) {
    auto defs = e.definitions ? e.definitions : prompts::Definitions::builtin(ds.dataset_id);
    if (!defs) throw ConfigError("mode def needs --definitions: no built-in definitions for " + ds.dataset_id);
    for (const auto& l : ds.labels.fallacies_only()) {
        if (!defs->find(l)) throw ConfigError("mode def: no definition for label '" + l.name() + "'");
    }
}

fs::path predictions_path(const fs::path& run) {
    return fs::is_directory(run) ? run / "predictions.jsonl" : run;
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
    RunConfig c = flags.resolve();
    validate(c);
    const auto mode = pipeline::Mode::parse(c.mode);
    const auto ds = datasets::read_canonical(c.data_dir);
    const auto samples = split_samples(ds, *parse_split(c.split), c.limit);
    auto ecfg = engine_config(c);
    if (mode.kind == pipeline::Mode::Kind::DEF) check_definitions(ecfg, ds);

    if (c.run_id.empty()) c.run_id = sanitize(ds.dataset_id + "-" + mode.to_string() + "-" + c.split);
    const fs::path run_dir = fs::path(c.out_dir) / c.run_id;
    fs::create_directories(run_dir);
    json resolved = to_json(c);
    resolved["dataset"] = ds.dataset_id;
    write_text(run_dir / "config.json", resolved.dump(2) + "\n");

    const auto path = run_dir / "predictions.jsonl";
    repair_run(path);
    const auto done = completed_ids(path);
    std::vector<const Sample*> pending;
    for (const auto& s : samples) {
        if (!done.contains(s.id)) pending.push_back(&s);
    }

    auto stack = make_backend(c);
    pipeline::Engine engine(stack.top, ecfg);
    RunWriter writer(path);

    // Results are appended in input order whatever order workers finish in.
    std::vector<std::optional<pipeline::Prediction>> results(pending.size());
    std::size_t next_write = 0, written = 0, degraded = 0;
    std::mutex write_mutex;
    auto flush_ready = [&](bool all) {
        while (next_write < results.size() && (results[next_write] || all)) {
            if (results[next_write]) {
                writer.append(*results[next_write]);
                if (results[next_write]->degraded()) ++degraded;
                results[next_write].reset();
                ++written;
            }
            ++next_write;
        }
    };

    std::exception_ptr failure;
    {
        SigintGuard guard;
        try {
            parallel_for(pending.size(), static_cast<std::size_t>(c.concurrency), [&](std::size_t i) {
                if (g_interrupted) throw Interrupted();
                auto p = engine.run_pipeline(*pending[i], ds.labels, mode);
                std::lock_guard lock(write_mutex);
                results[i] = std::move(p);
                flush_ready(false);
            });
        } catch (...) {
            failure = std::current_exception();
        }
        std::lock_guard lock(write_mutex);
        flush_ready(true);
    }

    json summary{{"run_id", c.run_id},
                 {"predictions", path.string()},
                 {"samples", samples.size()},
                 {"resumed", done.size()},
                 {"written", written},
                 {"degraded", degraded},
                 {"backend_calls", stack.caching->misses()},
                 {"cache_hits", stack.caching->hits()}};
    out << summary.dump() << "\n";
    if (failure) std::rethrow_exception(failure);
    return 0;
}

struct EvalFlags {
    std::string run;
    std::string data;
    std::optional<std::string> out;
};

std::vector<pipeline::Prediction> load_matching_run(const fs::path& run, const datasets::CanonicalDataset& ds) {
    auto preds = read_run(predictions_path(run));
    for (const auto& p : preds) {
        if (p.dataset_id() != ds.dataset_id) {
            throw DataError("run " + run.string() + " holds " + p.dataset_id() + " predictions but the gold data is " +
                            ds.dataset_id);
        }
    }
    return preds;
}

fs::path default_out(const fs::path& run) {
    return fs::is_directory(run) ? run : (run.has_parent_path() ? run.parent_path() : fs::path("."));
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
    const auto ds = datasets::read_canonical(f.data);
    const auto preds = load_matching_run(f.run, ds);
    const auto report = eval::score(preds, eval::gold_map(ds.samples), ds.labels, ds.seed);
    const fs::path dir = f.out ? fs::path(*f.out) : default_out(f.run);
    write_text(dir / "eval.json", eval::to_json(report).dump(2) + "\n");
    write_text(dir / "eval.csv", eval::csv_header() + "\n" + eval::csv_row(report) + "\n");
    out << eval::csv_header() << "\n" << eval::csv_row(report) << "\n";
    return 0;
}

struct CalibrateFlags {
    std::string run;
    std::string data;
    std::optional<std::string> out;
    std::size_t bins = 10;
    std::string source = "final";
    std::optional<std::string> bands;
};

int cmd_calibrate(const CalibrateFlags& f, std::ostream& out) {
    if (f.bins == 0) throw ConfigError("--bins must be positive");
    const auto ds = datasets::read_canonical(f.data);
    const auto preds = load_matching_run(f.run, ds);
    std::vector<eval::ScoredItem> items;
    if (text::iequals(f.source, "final")) {
        items = eval::final_items(preds);
    } else if (auto kind = parse_kind(f.source)) {
        items = eval::query_items(preds, *kind);
    } else {
        throw ConfigError("unknown confidence source '" + f.source + "' (expected final, CG, EX or GO)");
    }
    const auto rel = eval::reliability(items, eval::gold_map(ds.samples), f.bins);
    const fs::path dir = f.out ? fs::path(*f.out) : default_out(f.run);
    write_text(dir / "reliability.csv", eval::bins_csv(rel));
    write_text(dir / "reliability.json", eval::to_json(rel).dump(2) + "\n");
    write_text(dir / "reliability.svg", svg::reliability_diagram(rel, ds.dataset_id + " " + f.source));
    char buf[64];
    std::snprintf(buf, sizeof buf, "ECE %.6f", rel.ece);
    out << buf << " (" << rel.scored << " scored, " << rel.absent << " without confidence, " << f.bins << " bins)\n";
    if (f.bands) {
        auto edges = parse_ratios(*f.bands);
        if (edges.size() < 2) throw ConfigError("--bands needs at least two edges, e.g. 0,0.5,1");
        const auto report = eval::f1_by_confidence(items, eval::gold_map(ds.samples), edges);
        write_text(dir / "bands.json", eval::to_json(report).dump(2) + "\n");
        for (const auto& b : report.bands) {
            if (b.micro_f1) {
                std::snprintf(buf, sizeof buf, "band [%g, %g] n=%zu micro_f1 %.6f", b.lower, b.upper, b.count, *b.micro_f1);
            } else {
                std::snprintf(buf, sizeof buf, "band [%g, %g] n=0", b.lower, b.upper);
            }
            out << buf << "\n";
        }
    }
    return 0;
}

struct AblateFlags {
    RunFlags run_flags;
    std::vector<std::string> runs;
    std::vector<std::string> data;
    std::optional<std::string> variant;
    std::string seeds = "0..4";
    bool perturb = false;
    std::string ratios = "0,0.25,0.5,0.75,1";
    std::optional<std::string> neighbors;
    std::size_t subset = 100;
    std::size_t draws = 5;
    std::uint64_t seed = 0;
    std::optional<std::string> out;
};

int cmd_ablate(const AblateFlags& f, std::ostream& out) {
    if (f.runs.size() != f.data.size() || f.runs.empty()) {
        throw ConfigError("give one --run per --data (stored run and its canonical dataset)");
    }
    if (!f.perturb && !f.variant) throw ConfigError("ablate needs --variant or --perturb");
    std::optional<RankingVariant> variant_kind;
    if (f.variant) {
        variant_kind = RankingVariant::parse(*f.variant);
    }
    RunConfig c = f.run_flags.resolve();
    c.data_dir = f.data.front();
    validate(c);
    auto stack = make_backend(c);
    pipeline::Engine engine(stack.top, engine_config(c));
    const auto workers = static_cast<std::size_t>(c.concurrency);

    std::vector<datasets::CanonicalDataset> sets;
    std::vector<ablation::StoredRun> stored;
    for (std::size_t i = 0; i < f.runs.size(); ++i) {
        sets.push_back(datasets::read_canonical(f.data[i]));
        stored.push_back(ablation::index_run(load_matching_run(f.runs[i], sets.back())));
    }
    auto covered = [&](std::size_t i) {
        std::vector<Sample> xs;
        for (const auto& s : sets[i].samples) {
            if (stored[i].contains(s.id)) xs.push_back(s);
        }
        return xs;
    };

    const fs::path dir = f.out ? fs::path(*f.out) : default_out(f.runs.front()) / "ablation";
    std::string csv = ablation::csv_header() + "\n";
    json summary = json::array();

    if (variant_kind) {
        const bool random = variant_kind->kind == RankingVariant::Kind::Random;
        const auto seeds = random ? (f.variant->find(':') != std::string::npos
                                         ? std::vector<std::uint64_t>{variant_kind->seed}
                                         : parse_seeds(f.seeds))
                                  : std::vector<std::uint64_t>{};
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const auto xs = covered(i);
            const auto& id = sets[i].dataset_id;
            if (random) {
                auto avg = ablation::run_random_averaged(engine, xs, stored[i], sets[i].labels, seeds, workers);
                for (std::size_t k = 0; k < avg.seeds.size(); ++k) {
                    csv += ablation::csv_row(id, "ranking", "random", "", avg.seeds[k], avg.per_seed[k]) + "\n";
                }
                eval::EvalReport mean, stdev;
                mean.accuracy = avg.mean_accuracy;
                mean.macro_f1 = avg.mean_macro_f1;
                stdev.accuracy = avg.std_accuracy;
                stdev.macro_f1 = avg.std_macro_f1;
                csv += ablation::csv_row(id, "ranking", "random-mean", "", std::nullopt, mean) + "\n";
                csv += ablation::csv_row(id, "ranking", "random-std", "", std::nullopt, stdev) + "\n";
                summary.push_back(json{{"dataset", id},
                                   {"variant", "random"},
                                   {"runs", avg.seeds.size()},
                                   {"mean_accuracy", avg.mean_accuracy},
                                   {"std_accuracy", avg.std_accuracy},
                                   {"mean_macro_f1", avg.mean_macro_f1},
                                   {"std_macro_f1", avg.std_macro_f1}});
            } else {
                auto r = ablation::run_variant(engine, xs, stored[i], *variant_kind, sets[i].labels, workers);
                csv += ablation::csv_row(id, "ranking", variant_kind->to_string(), "", std::nullopt, r.report) + "\n";
                summary.push_back(json{{"dataset", id},
                                   {"variant", variant_kind->to_string()},
                                   {"accuracy", r.report.accuracy},
                                   {"macro_f1", r.report.macro_f1}});
            }
        }
    }

    if (f.perturb) {
        if (!f.neighbors) throw ConfigError("--perturb needs --neighbors <table>");
        const auto table = ablation::TableNeighborSource::from_file(*f.neighbors);
        const auto ratios = parse_ratios(f.ratios);
        std::vector<Sample> pool;
        std::map<std::string, LabelSet> label_sets;
        ablation::StoredRun all_stored;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            auto xs = covered(i);
            pool.insert(pool.end(), xs.begin(), xs.end());
            label_sets[sets[i].dataset_id] = sets[i].labels;
            all_stored.insert(stored[i].begin(), stored[i].end());
        }
        std::vector<Sample> chosen = pool;
        json draw_log = nullptr;
        if (f.subset > 0 && f.subset < pool.size()) {
            auto draw = ablation::draw_diverse_subset(pool, f.subset, f.draws, f.seed);
            chosen = draw.samples;
            draw_log = {{"chosen_draw", draw.chosen_draw}, {"unique_per_draw", draw.unique_per_draw}};
        }
        auto points =
            ablation::run_perturbation(engine, chosen, all_stored, label_sets, table, ratios, f.seed, workers);
        const std::string id = sets.size() == 1 ? sets.front().dataset_id : "MIXED";
        std::vector<std::string> x_labels;
        for (double r : ratios) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%g", r);
            x_labels.emplace_back(buf);
        }
        std::vector<svg::Series> acc_series, f1_series;
        for (auto kind : kAllKinds) {
            svg::Series acc{std::string(short_name(kind)) + " ACC", {}};
            svg::Series f1{std::string(short_name(kind)) + " F1", {}};
            for (const auto& p : points) {
                if (p.kind != kind) continue;
                csv += ablation::csv_row(id, "perturbation", x_labels[acc.ys.size()], std::string(short_name(kind)),
                                         f.seed, p.report) +
                       "\n";
                acc.ys.push_back(p.report.accuracy);
                f1.ys.push_back(p.report.macro_f1);
            }
            acc_series.push_back(std::move(acc));
            f1_series.push_back(std::move(f1));
        }
        acc_series.insert(acc_series.end(), f1_series.begin(), f1_series.end());
        write_text(dir / "perturbation.svg", svg::line_chart("word change ratio", x_labels, acc_series));
        std::size_t shortfall = 0;
        for (const auto& p : points) shortfall += p.shortfall;
        summary.push_back(json{{"dataset", id},
                           {"experiment", "perturbation"},
                           {"samples", chosen.size()},
                           {"points", points.size()},
                           {"replacement_shortfall", shortfall},
                           {"draw", draw_log}});
    }

    write_text(dir / "ablation.csv", csv);
    json resolved = to_json(c);
    resolved["runs"] = f.runs;
    resolved["datasets"] = f.data;
    write_text(dir / "config.json", resolved.dump(2) + "\n");
    out << csv;
    out << json{{"summary", summary}, {"backend_calls", stack.caching->misses()}, {"cache_hits", stack.caching->hits()}}
               .dump()
        << "\n";
    return 0;
}

struct IngestFlags {
    std::string dataset;
    std::string source;
    std::string out;
    std::uint64_t seed = 0;
    std::optional<std::string> layout;
    bool strict = false;
};

int cmd_ingest(const IngestFlags& f, std::ostream& out, std::ostream& err) {
    const auto& spec = datasets::spec_for(f.dataset);
    std::optional<datasets::SourceLayout> layout;
    if (f.layout) layout = datasets::SourceLayout::from_file(*f.layout);
    auto data = datasets::load_dataset(spec, f.source, f.strict ? datasets::Strictness::Fail : datasets::Strictness::Warn,
                                       layout);
    for (const auto& w : data.warnings) err << "warning: " << w << "\n";
    auto assignment = datasets::split_dataset(data, f.seed);
    datasets::write_canonical(f.out, data, assignment);
    const auto sizes = assignment.sizes();
    out << json{{"dataset", spec.dataset_id},
                {"samples", data.samples.size()},
                {"classes", data.labels.size()},
                {"seed", f.seed},
                {"sizes", {{"train", sizes.train}, {"dev", sizes.dev}, {"test", sizes.test}}},
                {"warnings", data.warnings}}
               .dump()
        << "\n";
    return 0;
}

std::string category_for(int code) {
    switch (code) {
        case 2: return "data";
        case 3: return "backend";
        default: return "config";
    }
}

void report_error(const std::exception_ptr& error, int code, std::ostream& err) {
    json j{{"error", category_for(code)}, {"exit_code", code}};
    try {
        std::rethrow_exception(error);
    } catch (const pipeline::StepFailure& e) {
        j["message"] = e.what();
        j["step"] = e.step;
    } catch (const Interrupted&) {
        j["error"] = "interrupted";
        j["message"] = "interrupted; completed predictions were kept and the run can be resumed";
    } catch (const std::exception& e) {
        j["message"] = e.what();
    } catch (...) {
        j["message"] = "unknown error";
    }
    err << j.dump() << "\n";
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fallacy detection with ranked reformulated queries"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "classify a dataset split; resumes an existing run");
    run_flags.bind(run, true);

    EvalFlags eval_flags;
    auto* ev = app.add_subcommand("eval", "score a run against gold labels");
    ev->add_option("--run", eval_flags.run, "predictions.jsonl or its run directory")->required();
    ev->add_option("--data", eval_flags.data, "canonical dataset directory")->required();
    ev->add_option("--out", eval_flags.out, "output directory (default: beside the run)");

    CalibrateFlags cal_flags;
    auto* cal = app.add_subcommand("calibrate", "reliability bins, ECE and diagram");
    cal->add_option("--run", cal_flags.run)->required();
    cal->add_option("--data", cal_flags.data)->required();
    cal->add_option("--out", cal_flags.out);
    cal->add_option("--bins", cal_flags.bins, "equal-width bins over [0, 1]")->capture_default_str();
    cal->add_option("--source", cal_flags.source, "final, or CG/EX/GO for per-query confidences")
        ->capture_default_str();
    cal->add_option("--bands", cal_flags.bands, "confidence band edges for F1 by band, e.g. 0,0.5,0.8,1");

    AblateFlags ab_flags;
    auto* ab = app.add_subcommand("ablate", "ranking variants and query perturbation over a stored run");
    ab_flags.run_flags.bind(ab, false);
    ab->add_option("--run", ab_flags.runs, "stored run (repeatable, paired with --data)")->required();
    ab->add_option("--data", ab_flags.data, "canonical dataset (repeatable)")->required();
    ab->add_option("--variant", ab_flags.variant, "full, none, random or random:<seed>");
    ab->add_option("--seeds", ab_flags.seeds, "seeds for random, e.g. 0..4 or 0,2,4")->capture_default_str();
    ab->add_flag("--perturb", ab_flags.perturb, "word-change perturbation sweep");
    ab->add_option("--ratios", ab_flags.ratios, "change ratios")->capture_default_str();
    ab->add_option("--neighbors", ab_flags.neighbors, "word<TAB>neighbor,... table");
    ab->add_option("--subset", ab_flags.subset, "diverse subset size (0 = all)")->capture_default_str();
    ab->add_option("--draws", ab_flags.draws, "random draws for the subset")->capture_default_str();
    ab->add_option("--seed", ab_flags.seed, "seed for subset draws and perturbation")->capture_default_str();
    ab->add_option("--ablation-out", ab_flags.out, "output directory (default: <run>/ablation)");

    IngestFlags in_flags;
    auto* ing = app.add_subcommand("ingest", "convert a source corpus to the canonical format with splits");
    ing->add_option("--dataset", in_flags.dataset, "PROPAGANDA, ARGOTARIO, LOGIC, COVID-19 or CLIMATE")->required();
    ing->add_option("--source", in_flags.source, "directory holding the source files")->required();
    ing->add_option("--out", in_flags.out, "canonical output directory")->required();
    ing->add_option("--seed", in_flags.seed, "split seed")->capture_default_str();
    ing->add_option("--layout", in_flags.layout, "override the built-in source layout (JSON)");
    ing->add_flag("--strict", in_flags.strict, "fail when N or C differ from the expected counts");

    std::string cache_dir = ".fallacy-cache";
    auto* cache = app.add_subcommand("cache", "inspect or clear the response cache");
    cache->require_subcommand(1);
    auto* stats = cache->add_subcommand("stats", "record count and size");
    auto* purge = cache->add_subcommand("purge", "delete every record");
    for (auto* sub : {stats, purge}) sub->add_option("--cache-dir", cache_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags, out);
        if (ev->parsed()) return cmd_eval(eval_flags, out);
        if (cal->parsed()) return cmd_calibrate(cal_flags, out);
        if (ab->parsed()) return cmd_ablate(ab_flags, out);
        if (ing->parsed()) return cmd_ingest(in_flags, out, err);
        if (stats->parsed()) {
            llm::ResponseCache c(cache_dir);
            auto s = c.stats();
            out << json{{"path", c.path().string()}, {"records", s.records}, {"bytes", s.bytes}}.dump() << "\n";
            return 0;
        }
        if (purge->parsed()) {
            llm::ResponseCache c(cache_dir);
            out << json{{"purged", c.purge()}}.dump() << "\n";
            return 0;
        }
    } catch (...) {
        auto error = std::current_exception();
        int code = exit_code_for(error);
        try {
            std::rethrow_exception(error);
        } catch (const Interrupted&) {
            code = 130;
        } catch (...) {
        }
        report_error(error, code, err);
        return code;
    }
    return 1;
}

}  // namespace fallacy::cli
