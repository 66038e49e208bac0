// aerothreat: curate, annotate, split, train and evaluate the dual-head classifier.

#include "aerothreat/aerothreat.hpp"
#include "aerothreat/run_config.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace fs = std::filesystem;
using namespace aerothreat;

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kInvalid = 2, kDataError = 3 };

struct SourceSpec {
    fs::path dir;
    std::string category;
    std::string name;
};

// DIR[:CATEGORY[:NAME]]; category and name default to the directory's base name.
SourceSpec parse_source(const std::string &text) {
    SourceSpec s;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t pos; (pos = text.find(':', start)) != std::string::npos; start = pos + 1) {
        parts.push_back(text.substr(start, pos - start));
    }
    parts.push_back(text.substr(start));
    if (parts.size() > 3 || parts[0].empty()) {
        throw ValidationError(fmt::format("--source '{}' must look like DIR[:CATEGORY[:NAME]]", text));
    }
    s.dir = parts[0];
    const std::string base = fs::path(s.dir).lexically_normal().filename().string();
    s.category = parts.size() > 1 && !parts[1].empty() ? parts[1] : base;
    s.name = parts.size() > 2 && !parts[2].empty() ? parts[2] : base;
    return s;
}

LabelSpace resolve_label_space(const std::string &name, const std::string &members) {
    if (!members.empty()) {
        std::vector<std::string> m;
        std::size_t start = 0;
        for (std::size_t pos; (pos = members.find(',', start)) != std::string::npos; start = pos + 1) {
            m.push_back(members.substr(start, pos - start));
        }
        m.push_back(members.substr(start));
        return make_label_space(name.empty() ? "custom" : name, m);
    }
    const std::string n = to_lower(name.empty() ? "aodta" : name);
    if (n == "aodta") return aodta_label_space();
    if (n == "avd") return avd_label_space();
    throw ValidationError(fmt::format("unknown label space '{}' (expected aodta, avd, or --categories)", name));
}

RunConfig base_config(const std::string &config_path) {
    return config_path.empty() ? RunConfig{} : load_run_config(config_path);
}

fs::path require_file(const std::string &p, const char *what) {
    if (!fs::is_regular_file(p)) throw IoError(fmt::format("{} '{}' does not exist", what, p));
    return p;
}

void print_counts(const DatasetManifest &before, const std::optional<DatasetManifest> &after) {
    const auto c0 = manifest_counts(before);
    std::size_t width = 5;
    for (const auto &m : before.label_space.members()) width = std::max(width, m.size());
    if (after) {
        const auto c1 = manifest_counts(*after);
        fmt::print("{:<{}}  {:>8}  {:>19}\n", "Class", width, "Count", "After Augmentation");
        for (std::size_t i = 0; i < c0.counts.size(); ++i) {
            fmt::print("{:<{}}  {:>8}  {:>19}\n", before.label_space.members()[i], width, c0.counts[i], c1.counts[i]);
        }
        fmt::print("{:<{}}  {:>8}  {:>19}\n", "Total", width, c0.total(), c1.total());
    } else {
        fmt::print("{:<{}}  {:>8}\n", "Class", width, "Count");
        for (std::size_t i = 0; i < c0.counts.size(); ++i) {
            fmt::print("{:<{}}  {:>8}\n", before.label_space.members()[i], width, c0.counts[i]);
        }
        fmt::print("{:<{}}  {:>8}\n", "Total", width, c0.total());
    }
}

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_json(const fs::path &p, const nlohmann::ordered_json &j) {
    detail::write_text_file(p, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t per_category = 100;
    std::uint64_t seed = 0;
    std::string label_space, categories;
};

int run_synth(const SynthArgs &a) {
    SynthConfig c;
    c.label_space = resolve_label_space(a.label_space, a.categories);
    c.per_category = a.per_category;
    c.seed = a.seed;
    write_synthetic_dataset(c, a.out);
    fmt::print("wrote {} images per category for {} categories under {}\n", c.per_category, c.label_space.size(),
               a.out);
    return kOk;
}

struct CurateArgs {
    std::vector<std::string> sources;
    std::string root;
    std::string out;
    std::string label_space, categories;
    std::string config;
    std::optional<std::uint64_t> seed;
    bool balance = false;
};

int run_curate(const CurateArgs &a) {
    RunConfig cfg = base_config(a.config);
    if (a.seed) cfg.set_seed(*a.seed);
    std::vector<SourceSpec> sources;
    for (const auto &s : a.sources) sources.push_back(parse_source(s));
    if (!a.root.empty()) {
        if (!fs::is_directory(a.root)) throw IoError(fmt::format("source root '{}' does not exist", a.root));
        std::vector<fs::path> dirs;
        for (const auto &e : fs::directory_iterator(a.root)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto &d : dirs) sources.push_back({d, d.filename().string(), d.filename().string()});
    }
    if (sources.empty()) throw ValidationError("curate needs at least one --source or --root");
    for (const auto &s : sources) {
        if (!fs::is_directory(s.dir)) throw IoError(fmt::format("source directory '{}' does not exist", s.dir.string()));
    }
    const LabelSpace space = resolve_label_space(a.label_space, a.categories);

    DatasetManifest m{space.name(), space, {}, std::nullopt, nlohmann::ordered_json::object()};
    std::size_t failed = 0;
    for (const auto &s : sources) {
        try {
            IngestResult r = ingest_source(s.dir, s.name, s.category, m);
            for (const auto &u : r.unreadable) fmt::print(stderr, "warning: {}: skipped {}\n", s.name, u);
            fmt::print(stderr, "{}: {} image(s) as {}\n", s.name, r.added, s.category);
            m = std::move(r.manifest);
        } catch (const ValidationError &e) {
            ++failed;
            fmt::print(stderr, "error: source '{}' failed: {}\n", s.dir.string(), e.what());
        }
    }
    if (failed == sources.size()) throw DecodeError("every source failed; no manifest written");

    DedupeResult d = dedupe(m);
    if (d.removed > 0) fmt::print(stderr, "removed {} duplicate image(s)\n", d.removed);
    const fs::path out_dir = a.out;
    std::optional<DatasetManifest> balanced;
    if (a.balance) balanced = balance_by_augmentation(d.manifest, cfg.augmentation, file_balance_io(out_dir / "augmented"));
    print_counts(d.manifest, balanced);
    const fs::path manifest_path = out_dir / "manifest.jsonl";
    save_manifest(balanced ? *balanced : d.manifest, manifest_path);
    write_json(out_dir / "curate_config.json", run_config_to_json(cfg));
    fmt::print("manifest: {}\n", manifest_path.string());
    return kOk;
}

struct ManifestArgs {
    std::string manifest;
    std::string out;  // defaults to rewriting the input
    std::string config;
};

struct AnnotateArgs : ManifestArgs {
    std::string rules;
};

int run_annotate(const AnnotateArgs &a) {
    RunConfig cfg = base_config(a.config);
    if (!a.rules.empty()) cfg.rules = a.rules;
    const fs::path in = require_file(a.manifest, "manifest");
    const RuleSet rules = cfg.rules ? load_ruleset(require_file(cfg.rules->string(), "rules file")) : default_ruleset();
    DatasetManifest m = load_manifest(in);
    DatasetManifest annotated;
    try {
        annotated = annotate_manifest(m, rules);
    } catch (const UnannotatableRecords &e) {
        fmt::print(stderr, "error: {} record(s) match no threat rule and the rules set no default:\n", e.ids().size());
        for (const auto &id : e.ids()) fmt::print(stderr, "  {}\n", id);
        return kDataError;
    }
    std::array<std::size_t, kThreatLevelCount> counts{};
    for (const auto &r : annotated.records) ++counts[threat_index(*r.threat)];
    fmt::print("{:<8}  {:>8}\n", "Threat", "Count");
    for (ThreatLevel t : kThreatLevels) fmt::print("{:<8}  {:>8}\n", to_string(t), counts[threat_index(t)]);
    fmt::print("{:<8}  {:>8}\n", "Total", annotated.records.size());
    save_manifest(annotated, a.out.empty() ? in : fs::path(a.out));
    return kOk;
}

struct SplitArgs : ManifestArgs {
    std::optional<double> train_fraction;
    std::optional<std::uint64_t> seed;
};

int run_split(const SplitArgs &a) {
    RunConfig cfg = base_config(a.config);
    if (a.seed) cfg.set_seed(*a.seed);
    if (a.train_fraction) cfg.split.train_fraction = *a.train_fraction;
    const fs::path in = require_file(a.manifest, "manifest");
    DatasetManifest m = stratified_split(load_manifest(in), cfg.split);
    const auto train = manifest_counts(split_manifest(m, Split::Train));
    const auto test = manifest_counts(split_manifest(m, Split::Test));
    fmt::print("{:<12}  {:>6}  {:>6}\n", "Class", "Train", "Test");
    for (std::size_t i = 0; i < m.label_space.size(); ++i) {
        fmt::print("{:<12}  {:>6}  {:>6}\n", m.label_space.members()[i], train.counts[i], test.counts[i]);
    }
    fmt::print("{:<12}  {:>6}  {:>6}\n", "Total", train.total(), test.total());
    save_manifest(m, a.out.empty() ? in : fs::path(a.out));
    return kOk;
}

struct TrainArgs {
    std::string manifest, out, config, backbone;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    bool frozen = false;
    std::string heads = "separate";
};

AccuracyView parse_view(const std::string &s) {
    if (s == "separate") return AccuracyView::SeparateHeads;
    if (s == "mean") return AccuracyView::MeanOfHeads;
    throw ValidationError(fmt::format("--heads must be 'separate' or 'mean', got '{}'", s));
}

int run_train(const TrainArgs &a) {
    RunConfig cfg = base_config(a.config);
    if (a.seed) cfg.set_seed(*a.seed);
    if (a.epochs) cfg.training.epochs = *a.epochs;
    if (!a.backbone.empty()) cfg.network.backbone = parse_backbone_kind(a.backbone);
    if (a.frozen) cfg.network.frozen = true;
    const AccuracyView view = parse_view(a.heads);
    cfg.training.validate();
    const fs::path in = require_file(a.manifest, "manifest");
    const DatasetManifest m = load_manifest(in);
    const NetworkConfig net_config = cfg.network.network_config(m.label_space);
    if (!m.split_assignments) throw ValidationError("manifest has no train/test split; run 'split' first");
    const DatasetManifest train_m = split_manifest(m, Split::Train);
    const DatasetManifest val_m = split_manifest(m, Split::Test);

    const fs::path out = a.out;
    fs::create_directories(out);
    nlohmann::ordered_json run = run_config_to_json(cfg);
    run["manifest"] = fs::absolute(in).lexically_normal().generic_string();
    run["validation_set"] = "test split of the manifest";
    write_json(out / "run_config.json", run);

    DualHeadNetwork net(net_config);
    net.initialize(cfg.training.seed);
    TrainOptions opts;
    opts.checkpoint_path = out / "checkpoint.json";
    opts.on_epoch = [](const EpochMetrics &e) {
        fmt::print("epoch {:>3}  loss {:.4f}/{:.4f}  class acc {:.4f}/{:.4f}  threat acc {:.4f}/{:.4f}\n", e.epoch,
                   e.train_loss, e.val_loss, e.train_class_acc, e.val_class_acc, e.train_threat_acc,
                   e.val_threat_acc);
        std::fflush(stdout);
    };
    const auto started = utc_timestamp();
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r = train(net, train_m, val_m, cfg.training, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_metrics_csv(r.metrics, out / "metrics.csv");
    save_batch_log_csv(r.batches, out / "batches.csv");
    plot_training_curves(r.metrics, out, view);
    if (!r.checkpoint) save_checkpoint(net, out / "checkpoint.json");
    write_json(out / "run_metadata.json", {{"started_utc", started},
                                           {"finished_utc", utc_timestamp()},
                                           {"wall_seconds", seconds},
                                           {"best_epoch", r.best_epoch}});
    fmt::print("best epoch {}; outputs in {}\n", r.best_epoch, out.string());
    return kOk;
}

struct EvaluateArgs {
    std::string checkpoint, manifest, predictions, out;
};

void export_and_print(const ClassificationReport &rep, const ConfusionMatrix &cm, const fs::path &out,
                      const std::string &name, std::string_view title) {
    export_report(rep, cm, out, name, title);
    fmt::print("[{}]\n{}\n", name, format_report_table(rep, title));
}

int run_evaluate(const EvaluateArgs &a) {
    const fs::path out = a.out;
    if (!a.predictions.empty()) {
        if (!a.checkpoint.empty() || !a.manifest.empty()) {
            throw ValidationError("--predictions replaces --checkpoint/--manifest; give one or the other");
        }
        for (const auto &set : load_predictions_csv(require_file(a.predictions, "predictions file"))) {
            const ConfusionMatrix cm = confusion_matrix(set.truth, set.pred, set.labels);
            export_and_print(classification_report(cm), cm, out, set.head,
                             set.head == "threat" ? "Threat" : "Label");
        }
        return kOk;
    }
    if (a.checkpoint.empty() || a.manifest.empty()) {
        throw ValidationError("evaluate needs --checkpoint and --manifest, or --predictions");
    }
    const DualHeadNetwork net = load_checkpoint(require_file(a.checkpoint, "checkpoint"));
    const DatasetManifest m = load_manifest(require_file(a.manifest, "manifest"));
    if (!m.split_assignments) throw ValidationError("manifest has no train/test split; run 'split' first");
    const DatasetManifest test = split_manifest(m, Split::Test);
    if (test.label_space != net.config().categories) {
        throw ValidationError(fmt::format("manifest label space '{}' [{}] does not match checkpoint label space "
                                          "'{}' [{}]",
                                          test.label_space.name(), fmt::join(test.label_space.members(), ","),
                                          net.config().categories.name(),
                                          fmt::join(net.config().categories.members(), ",")));
    }
    if (test.records.empty()) throw ValidationError("test split is empty");
    const LabeledImages data = load_labeled_images(test);
    for (Head h : {Head::Category, Head::Threat}) {
        const Evaluation ev = evaluate_model(net, data, h);
        export_and_print(ev.report, ev.confusion, out, to_string(h), h == Head::Category ? "Class" : "Threat");
    }
    return kOk;
}

struct PlotArgs {
    std::string metrics, out, heads = "separate";
};

int run_plot(const PlotArgs &a) {
    const auto metrics = load_metrics_csv(require_file(a.metrics, "metrics file"));
    const auto paths = plot_training_curves(metrics, a.out.empty() ? fs::path(a.metrics).parent_path() : fs::path(a.out),
                                            parse_view(a.heads));
    fmt::print("{}\n{}\n", paths.accuracy.string(), paths.loss.string());
    return kOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Airborne object category and threat-level classifier pipeline"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto *c_synth = app.add_subcommand("synth", "Write the deterministic synthetic shape/hue dataset");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--per-category", synth.per_category, "Images per category");
    c_synth->add_option("--seed", synth.seed, "Generator seed");
    c_synth->add_option("--label-space", synth.label_space, "aodta (default) or avd");
    c_synth->add_option("--categories", synth.categories, "Comma-separated custom categories");

    CurateArgs curate;
    auto *c_curate = app.add_subcommand("curate", "Ingest image directories, deduplicate, optionally balance");
    c_curate->add_option("--source", curate.sources, "DIR[:CATEGORY[:NAME]] (repeatable)");
    c_curate->add_option("--root", curate.root, "Directory whose subdirectories are categories");
    c_curate->add_option("--out", curate.out, "Output directory for manifest.jsonl")->required();
    c_curate->add_option("--label-space", curate.label_space, "aodta (default) or avd");
    c_curate->add_option("--categories", curate.categories, "Comma-separated custom categories");
    c_curate->add_option("--config", curate.config, "Run config JSON");
    c_curate->add_option("--seed", curate.seed, "Augmentation seed");
    c_curate->add_flag("--balance", curate.balance, "Augment minority categories up to the largest");

    AnnotateArgs annotate;
    auto *c_annotate = app.add_subcommand("annotate", "Assign threat levels from a rule set");
    c_annotate->add_option("--manifest", annotate.manifest, "Input manifest")->required();
    c_annotate->add_option("--rules", annotate.rules, "Rules JSON (default: built-in rules)");
    c_annotate->add_option("--out", annotate.out, "Output manifest (default: overwrite input)");
    c_annotate->add_option("--config", annotate.config, "Run config JSON");

    SplitArgs split;
    auto *c_split = app.add_subcommand("split", "Stratified train/test split");
    c_split->add_option("--manifest", split.manifest, "Input manifest")->required();
    c_split->add_option("--train-fraction", split.train_fraction, "Fraction of each category used for training");
    c_split->add_option("--seed", split.seed, "Split seed");
    c_split->add_option("--out", split.out, "Output manifest (default: overwrite input)");
    c_split->add_option("--config", split.config, "Run config JSON");

    TrainArgs train_args;
    auto *c_train = app.add_subcommand("train", "Train the dual-head network");
    c_train->add_option("--manifest", train_args.manifest, "Annotated, split manifest")->required();
    c_train->add_option("--out", train_args.out, "Output directory")->required();
    c_train->add_option("--config", train_args.config, "Run config JSON");
    c_train->add_option("--seed", train_args.seed, "Seed for initialisation and batch order");
    c_train->add_option("--epochs", train_args.epochs, "Number of epochs");
    c_train->add_option("--backbone", train_args.backbone, "standin or efficientnet-b4");
    c_train->add_flag("--frozen", train_args.frozen, "Keep backbone parameters fixed");
    c_train->add_option("--heads", train_args.heads, "Accuracy plot: separate (default) or mean");

    EvaluateArgs eval;
    auto *c_eval = app.add_subcommand("evaluate", "Per-head classification reports and confusion matrices");
    c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint from 'train'");
    c_eval->add_option("--manifest", eval.manifest, "Split manifest; its test split is evaluated");
    c_eval->add_option("--predictions", eval.predictions, "CSV of truth,pred (or head,truth,pred) rows");
    c_eval->add_option("--out", eval.out, "Output directory")->required();

    PlotArgs plot;
    auto *c_plot = app.add_subcommand("plot", "Redraw curves from a metrics CSV");
    c_plot->add_option("--metrics", plot.metrics, "metrics.csv from 'train'")->required();
    c_plot->add_option("--out", plot.out, "Output directory (default: next to the CSV)");
    c_plot->add_option("--heads", plot.heads, "separate (default) or mean");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_curate) return run_curate(curate);
        if (*c_annotate) return run_annotate(annotate);
        if (*c_split) return run_split(split);
        if (*c_train) return run_train(train_args);
        if (*c_eval) return run_evaluate(eval);
        if (*c_plot) return run_plot(plot);
    } catch (const ValidationError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInvalid;
    } catch (const IoError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInvalid;
    } catch (const DecodeError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kDataError;
    } catch (const UnannotatableError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kDataError;
    } catch (const NumericError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kDataError;
    } catch (const std::exception &e) {
        fmt::print(stderr, "unexpected error: {}\n", e.what());
        return kUnexpected;
    }
    return kUnexpected;
}
