#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wgcn/checkpoint.hpp"
#include "wgcn/eval.hpp"
#include "wgcn/matrix_io.hpp"
#include "wgcn/pipeline.hpp"
#include "wgcn/settings.hpp"

// The `wgcn` command-line tool. Exit codes: 0 success, 1 usage or runtime
// error, 2 unreadable or malformed input, 3 training diverged, 4 hash mismatch.

namespace wgcn::cli {

inline constexpr const char* kRunRootEnv = "WGCN_RUN_ROOT";
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kHistorySchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

enum Exit : int { kOk = 0, kFailure = 1, kBadInput = 2, kDiverged = 3, kMismatch = 4 };

/// Collects flag values and applies only those given on the command line,
/// after defaults and config files have been layered in.
class FlagOverlay {
public:
    template <class T>
    CLI::Option* option(CLI::App* app, const std::string& name, const std::string& help,
                        std::function<void(Settings&, const T&)> apply) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, help);
        entries_.push_back({opt, [value, apply](Settings& s) { apply(s, *value); }});
        return opt;
    }

    CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& help,
                      std::function<void(Settings&)> apply) {
        CLI::Option* opt = app->add_flag(name, help);
        entries_.push_back({opt, [apply](Settings& s) { apply(s); }});
        return opt;
    }

    void apply(Settings& s) const {
        for (const auto& e : entries_)
            if (e.opt->count() > 0) e.apply(s);
    }

private:
    struct Entry {
        CLI::Option* opt;
        std::function<void(Settings&)> apply;
    };
    std::vector<Entry> entries_;
};

/// Options shared by every dataset-reading subcommand.
struct CommandContext {
    FlagOverlay flags;
    std::string config_path;
    std::string manifest_path;
    std::string graph_path;
    CLI::Option* manifest_opt = nullptr;
};

inline void add_dataset_flags(CLI::App* app, CommandContext& ctx) {
    auto& f = ctx.flags;
    f.option<std::string>(app, "--docs", "Text corpus: one document per line",
                          [](Settings& s, const std::string& v) { s.data.docs = v; });
    f.option<std::string>(app, "--meta", "Text corpus metadata: id<TAB>split<TAB>label per line",
                          [](Settings& s, const std::string& v) { s.data.meta = v; });
    f.option<std::string>(app, "--nodes", "Citation dataset nodes: id<TAB>split<TAB>label[<TAB>text]",
                          [](Settings& s, const std::string& v) { s.data.nodes = v; });
    f.option<std::string>(app, "--edges", "Citation dataset edges: id<TAB>id",
                          [](Settings& s, const std::string& v) { s.data.edges = v; });
    f.option<std::size_t>(app, "--min-freq", "Minimum document frequency for the vocabulary",
                          [](Settings& s, const std::size_t& v) { s.ingest.min_freq = v; });
    f.option<std::string>(app, "--weighting", "Feature weighting: count, tf, tfidf-l1",
                          [](Settings& s, const std::string& v) { s.ingest.weighting = parse_weighting(v); });
    f.option<double>(app, "--dev-fraction", "Share of train carved into dev when none is declared",
                     [](Settings& s, const double& v) { s.ingest.dev_fraction = v; });
    f.option<std::uint64_t>(app, "--split-seed", "Seed of the dev carve-out",
                            [](Settings& s, const std::uint64_t& v) { s.ingest.seed = v; });
    f.option<std::string>(app, "--vocab-scope", "Documents the vocabulary is built from: train, all",
                          [](Settings& s, const std::string& v) { s.ingest.vocab_scope = parse_vocab_scope(v); });
    app->add_option("--config", ctx.config_path, "JSON config file (flags take precedence)")
        ->check(CLI::ExistingFile);
}

inline void add_graph_flags(CLI::App* app, CommandContext& ctx) {
    auto& f = ctx.flags;
    f.option<std::string>(app, "--graph-kind,--variant", "Word graph: npmi, pmi, gram, citation",
                          [](Settings& s, const std::string& v) { s.graph.kind = parse_graph_kind(v); });
    f.option<std::size_t>(app, "--window", "Sliding window size for pmi/npmi",
                          [](Settings& s, const std::size_t& v) { s.graph.window_size = v; });
    f.option<double>(app, "--threshold", "Keep pmi/npmi edges strictly above this value",
                     [](Settings& s, const double& v) { s.graph.threshold = v; });
    f.option<std::size_t>(app, "--order", "Citation lift order k",
                          [](Settings& s, const std::size_t& v) { s.graph.lift_order = v; });
    f.option<std::string>(app, "--product-weighting", "Weighting of X inside gram and lift products",
                          [](Settings& s, const std::string& v) { s.graph.product_weighting = parse_weighting(v); });
    f.flag(app, "--lift-train-only", "Lift through the citation subgraph of training nodes only",
           [](Settings& s) { s.graph.lift_all_nodes = false; });
    f.flag(app, "--no-normalize", "Skip normalization of gram and lifted graphs",
           [](Settings& s) { s.graph.normalize = false; });
}

inline void add_train_flags(CLI::App* app, CommandContext& ctx) {
    auto& f = ctx.flags;
    f.option<double>(app, "--lr", "Adam learning rate",
                     [](Settings& s, const double& v) { s.train.learning_rate = v; });
    f.option<double>(app, "--dropout", "Dropout rate on propagated word representations",
                     [](Settings& s, const double& v) { s.train.dropout_rate = v; });
    f.option<double>(app, "--weight-decay", "L2 coefficient on W0 and W1",
                     [](Settings& s, const double& v) { s.train.weight_decay = v; });
    f.option<std::size_t>(app, "--max-epochs", "Upper bound on training epochs",
                          [](Settings& s, const std::size_t& v) { s.train.max_epochs = v; });
    f.option<std::size_t>(app, "--patience", "Epochs without dev improvement before stopping",
                          [](Settings& s, const std::size_t& v) { s.train.early_stop_patience = v; });
    f.flag(app, "--no-early-stop", "Train for max-epochs regardless of dev accuracy",
           [](Settings& s) { s.train.early_stopping = false; });
    f.flag(app, "--early-stop", "Stop on dev plateau", [](Settings& s) { s.train.early_stopping = true; });
    f.option<std::size_t>(app, "--propagation", "Word-graph propagation order n",
                          [](Settings& s, const std::size_t& v) { s.train.propagation_order = v; });
    f.option<std::size_t>(app, "--hidden", "Hidden dimension m",
                          [](Settings& s, const std::size_t& v) { s.train.hidden_dim = v; });
    f.option<std::string>(app, "--activation", "Activation after propagation: identity, relu",
                          [](Settings& s, const std::string& v) { s.train.activation = parse_activation(v); });
    f.option<std::uint64_t>(app, "--seed", "Initialization and dropout seed",
                            [](Settings& s, const std::uint64_t& v) { s.train.seed = v; });
}

inline void add_manifest_flags(CLI::App* app, CommandContext& ctx) {
    ctx.manifest_opt = app->add_option("--manifest", ctx.manifest_path,
                                       "Re-run from a manifest.json (inputs must match its hashes)")
                           ->check(CLI::ExistingFile);
    if (auto* cfg = app->get_option_no_throw("--config")) ctx.manifest_opt->excludes(cfg);
}

/// defaults < config file or manifest < flags.
inline Settings resolve_settings(const CommandContext& ctx, nlohmann::json* manifest_out = nullptr) {
    nlohmann::json layer = nlohmann::json::object();
    if (!ctx.manifest_path.empty()) {
        layer = load_json_file(ctx.manifest_path);
        if (layer.value("schema_version", 0) != kManifestSchemaVersion)
            throw FormatError("unsupported manifest schema version in " + ctx.manifest_path);
        if (layer.contains("data")) verify_data_hashes(layer.at("data"));
        if (manifest_out) *manifest_out = layer;
    } else if (!ctx.config_path.empty()) {
        layer = load_json_file(ctx.config_path);
    }
    // The layout decides the defaults, so look at flags first, then the file.
    Settings probe;
    ctx.flags.apply(probe);
    bool citation = probe.data.citation();
    if (!citation && probe.data.docs.empty() && probe.data.meta.empty())
        citation = config_declares_citation(layer).value_or(false);

    Settings s = default_settings(citation);
    merge_settings(s, layer);
    ctx.flags.apply(s);
    s.data.validate();
    s.train.validate();
    return s;
}

inline std::filesystem::path run_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(kRunRootEnv); env && *env) return env;
    return "runs";
}

/// New directory <root>/<UTC timestamp>-<command>[-<n>]; never reuses one.
inline std::filesystem::path create_run_dir(const std::filesystem::path& root, const std::string& command) {
    std::filesystem::create_directories(root);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
    const std::string base = std::string(stamp) + "-" + command;
    for (int n = 0;; ++n) {
        const auto dir = root / (n == 0 ? base : base + "-" + std::to_string(n));
        if (std::filesystem::create_directory(dir)) return dir;
    }
}

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return stamp;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

inline nlohmann::json base_manifest(const std::string& command, const Settings& s) {
    nlohmann::json m = to_json(s, true);
    m["schema_version"] = kManifestSchemaVersion;
    m["command"] = command;
    m["created"] = utc_now();
    return m;
}

/// Graph for a run: loaded from `path` (checked against the corpus
/// vocabulary) or built from the corpus.
inline WordGraph obtain_graph(const std::string& path, const Corpus& corpus, const Settings& s,
                              nlohmann::json* manifest) {
    if (path.empty()) return build_graph(corpus, s.graph);
    const auto meta = load_graph_sidecar(path);
    if (meta.contains("vocab_hash") && meta.at("vocab_hash").get<std::string>() != corpus.vocab.hash()) {
        throw HashMismatch("graph " + path + " was built for vocabulary " + meta.at("vocab_hash").get<std::string>() +
                           " but the dataset gives " + corpus.vocab.hash());
    }
    if (manifest && manifest->contains("graph_file")) {
        const auto recorded = manifest->at("graph_file").at("hash").get<std::string>();
        if (recorded != file_hash(path))
            throw HashMismatch("graph " + path + " does not match the hash recorded in the manifest");
    }
    WordGraph g = load_word_graph(path);
    if (g.vocab_size() != corpus.vocab.size())
        throw HashMismatch("graph " + path + " has " + std::to_string(g.vocab_size()) + " words, dataset has " +
                           std::to_string(corpus.vocab.size()));
    return g;
}

inline std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "schema_version,epoch,train_loss,dev_loss,dev_accuracy\n";
    for (const auto& e : history) {
        out += std::to_string(kHistorySchemaVersion) + "," + std::to_string(e.epoch) + "," +
               format_double(e.train_loss) + "," + format_double(e.dev_loss) + "," +
               format_double(e.dev_accuracy) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_dataset_stats(const CommandContext& ctx) {
    const Settings s = resolve_settings(ctx);
    const Corpus c = ingest(s);
    const auto sum = summarize(c);
    nlohmann::json j = {{"schema_version", 1},
                        {"layout", s.data.citation() ? "citation" : "text"},
                        {"docs", sum.docs},
                        {"train", sum.train},
                        {"dev", sum.dev},
                        {"test", sum.test},
                        {"words", sum.words},
                        {"classes", sum.classes},
                        {"average_length", sum.average_length},
                        {"edges", sum.edges},
                        {"empty_docs", c.stats.empty_docs},
                        {"oov_tokens", c.stats.oov_tokens},
                        {"carved_dev", c.stats.carved_dev},
                        {"label_names", c.split.label_names},
                        {"vocab_hash", c.vocab.hash()}};
    std::cout << j.dump(2) << "\n";
    return kOk;
}

inline int cmd_build_graph(const CommandContext& ctx, const std::string& out, const std::string& mtx_out) {
    const Settings s = resolve_settings(ctx);
    const Corpus c = ingest(s);
    const WordGraph g = build_graph(c, s.graph);
    nlohmann::json extra = {{"vocab_hash", c.vocab.hash()}, {"settings", to_json(s, true)}};
    save_word_graph(out, g, extra);
    write_file_atomic(std::string(out) + ".vocab.tsv", encode_vocabulary(c.vocab));
    if (!mtx_out.empty()) write_file_atomic(mtx_out, to_matrix_market(g.adjacency));
    const auto v = g.vocab_size();
    std::size_t off_diagonal = 0;
    for (std::size_t r = 0; r < v; ++r)
        for (auto col : g.adjacency.row_indices(r)) off_diagonal += col != r;
    const double density = v ? static_cast<double>(g.adjacency.nnz()) / (static_cast<double>(v) * static_cast<double>(v)) : 0.0;
    std::cout << "graph: " << out << "\n"
              << "kind: " << to_string(g.kind) << "\n"
              << "vocab_size: " << v << "\n"
              << "edges: " << off_diagonal / 2 << "\n"
              << "nnz: " << g.adjacency.nnz() << "\n"
              << "density: " << format_double(density) << "\n"
              << "matrix_hash: " << g.hash() << "\n";
    return kOk;
}

inline int cmd_train(const CommandContext& ctx, const std::string& root_flag) {
    nlohmann::json recorded;
    const Settings s = resolve_settings(ctx, &recorded);
    const Corpus c = ingest(s);
    std::string graph_path = ctx.graph_path;
    if (graph_path.empty() && recorded.contains("graph_file")) graph_path = recorded.at("graph_file").at("path");
    const WordGraph graph = obtain_graph(graph_path, c, s, recorded.is_null() ? nullptr : &recorded);
    const Experiment ex = make_experiment(c);

    const auto dir = create_run_dir(run_root(root_flag), "train");
    auto manifest = base_manifest("train", s);
    if (!graph_path.empty())
        manifest["graph_file"] = {{"path", std::filesystem::absolute(graph_path).string()}, {"hash", file_hash(graph_path)}};
    manifest["graph_hash"] = graph.hash();
    manifest["vocab_hash"] = c.vocab.hash();
    manifest["artifacts"] = {{"checkpoint", "model.wgcp"}, {"graph", "graph.wgcm"}, {"vocab", "vocab.tsv"},
                             {"history", "history.csv"}, {"report", "report.json"}};
    write_json(dir / "manifest.json", manifest);

    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    try {
        result = train(ex.data, graph, s.train);
    } catch (const TrainingDiverged& e) {
        std::cerr << "wgcn: error: " << e.what() << "\n";
        return kDiverged;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    save_checkpoint(dir / "model.wgcp", result.params,
                    {s.train, graph.hash(), c.vocab.hash(), s.ingest.weighting, c.split.label_names});
    save_word_graph(dir / "graph.wgcm", graph, {{"vocab_hash", c.vocab.hash()}});
    write_file_atomic(dir / "vocab.tsv", encode_vocabulary(c.vocab));
    write_file_atomic(dir / "history.csv", history_csv(result.history));

    RunReport report;
    report.seed = s.train.seed;
    report.epochs_run = result.history.size();
    report.best_epoch = result.best_epoch;
    report.wall_time_per_epoch_ms = report.epochs_run ? ms / static_cast<double>(report.epochs_run) : 0.0;
    report.peak_memory_bytes = alloc::peak_bytes.load();
    nlohmann::json rj = to_json(report);
    rj["schema_version"] = kReportSchemaVersion;
    if (ex.x_test.rows() > 0) {
        const auto predicted = predict(ex.x_test, graph, result.params, s.train);
        rj["accuracy"] = accuracy(predicted, ex.y_test);
        const auto pc = per_class_metrics(predicted, ex.y_test, ex.data.num_classes);
        rj["precision"] = pc.precision;
        rj["recall"] = pc.recall;
    } else {
        rj["accuracy"] = nullptr;
    }
    rj["label_names"] = c.split.label_names;
    rj["hardware"] = hardware_descriptor();
    write_json(dir / "report.json", rj);

    std::cout << "run: " << dir.string() << "\n"
              << "epochs: " << report.epochs_run << " (best " << report.best_epoch << ")\n"
              << "test_accuracy: " << (rj["accuracy"].is_null() ? std::string("n/a") : format_double(rj["accuracy"].get<double>()))
              << "\n";
    return kOk;
}

struct PredictArgs {
    std::string run_dir, checkpoint, graph, vocab, input, out;
};

inline int cmd_predict(const PredictArgs& a) {
    const auto pick = [&](const std::string& explicit_path, const char* name) -> std::filesystem::path {
        if (!explicit_path.empty()) return explicit_path;
        if (a.run_dir.empty()) throw std::invalid_argument(std::string("give --run or --") + name);
        return std::filesystem::path(a.run_dir) / (std::string(name) == "checkpoint" ? "model.wgcp"
                                                   : std::string(name) == "graph"    ? "graph.wgcm"
                                                                                      : "vocab.tsv");
    };
    const auto [params, info] = load_checkpoint(pick(a.checkpoint, "checkpoint"));
    const WordGraph graph = load_word_graph(pick(a.graph, "graph"));
    if (graph.hash() != info.graph_hash)
        throw HashMismatch("graph hash " + graph.hash() + " differs from the checkpoint's " + info.graph_hash);
    const Vocabulary vocab = load_vocabulary(pick(a.vocab, "vocab"));
    if (vocab.hash() != info.vocab_hash)
        throw HashMismatch("vocabulary hash " + vocab.hash() + " differs from the checkpoint's " + info.vocab_hash);

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> docs;
    const auto lines = read_lines(a.input);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto tab = lines[i].find('\t');
        ids.push_back(tab == std::string::npos ? std::to_string(i) : lines[i].substr(0, tab));
        docs.push_back(tokenize(tab == std::string::npos ? std::string_view(lines[i])
                                                         : std::string_view(lines[i]).substr(tab + 1)));
    }
    const auto x = apply_weighting(count_features(docs, vocab), info.weighting, vocab);
    const auto predicted = predict(x.matrix, graph, params, info.config);
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "\t" + info.label_names.at(predicted[i]) + "\n";
    if (a.out.empty() || a.out == "-") {
        std::cout << out;
    } else {
        write_file_atomic(a.out, out);
    }
    return kOk;
}

struct SweepArgs {
    std::string axis;
    std::vector<double> values;
    std::size_t trials = 10;
    std::string order_kind;  // propagation or lift; empty picks by layout
    std::string out;
    bool parallel = false;
};

inline int cmd_sweep(const CommandContext& ctx, const SweepArgs& a, const std::string& root_flag) {
    const Settings s = resolve_settings(ctx);
    const Corpus c = ingest(s);
    const Experiment ex = make_experiment(c);
    std::vector<SweepRow> rows;
    if (a.axis == "hidden_dim") {
        const WordGraph g = build_graph(c, s.graph);
        rows = sweep("hidden_dim", a.values, [&](double v) {
            TrialSetup t{s.train, g};
            t.config.hidden_dim = static_cast<std::size_t>(v);
            return t;
        }, ex, a.trials, a.parallel);
    } else if (a.axis == "window_size") {
        if (s.graph.kind != GraphKind::pmi && s.graph.kind != GraphKind::npmi)
            throw std::invalid_argument("window_size sweeps need a pmi or npmi graph");
        rows = sweep("window_size", a.values, [&](double v) {
            GraphOptions go = s.graph;
            go.window_size = static_cast<std::size_t>(v);
            return TrialSetup{s.train, build_graph(c, go)};
        }, ex, a.trials, a.parallel);
    } else if (a.axis == "order") {
        const std::string kind = a.order_kind.empty() ? (s.data.citation() ? "lift" : "propagation") : a.order_kind;
        if (kind != "lift" && kind != "propagation") throw std::invalid_argument("--order-kind is lift or propagation");
        std::vector<std::size_t> orders;
        for (double v : a.values) orders.push_back(static_cast<std::size_t>(v));
        rows = order_sweep(s.train, ex,
                           [&](std::size_t k) {
                               GraphOptions go = s.graph;
                               go.lift_order = k;
                               return build_graph(c, go);
                           },
                           orders, a.trials, kind == "lift" ? OrderAxis::citation_lift : OrderAxis::propagation,
                           a.parallel);
    } else {
        throw std::invalid_argument("--axis must be hidden_dim, window_size or order");
    }
    const std::string csv = emit_sweep_csv(rows);
    const auto dir = create_run_dir(run_root(root_flag), "sweep");
    auto manifest = base_manifest("sweep", s);
    manifest["options"] = {{"axis", a.axis}, {"values", a.values}, {"trials", a.trials}, {"order_kind", a.order_kind}};
    manifest["artifacts"] = {{"table", "sweep.csv"}};
    write_json(dir / "manifest.json", manifest);
    write_file_atomic(dir / "sweep.csv", csv);
    if (!a.out.empty()) write_file_atomic(a.out, csv);
    std::cout << csv;
    return kOk;
}

struct BenchArgs {
    std::size_t warmup = 2;
    std::size_t measured = 10;
};

inline int cmd_bench(const CommandContext& ctx, const BenchArgs& a, const std::string& root_flag) {
    nlohmann::json recorded;
    const Settings s = resolve_settings(ctx, &recorded);
    const Corpus c = ingest(s);
    const WordGraph graph = obtain_graph(ctx.graph_path, c, s, recorded.is_null() ? nullptr : &recorded);
    const Experiment ex = make_experiment(c);
    const TimingReport t = timing_harness(s.train, ex.data, graph, a.warmup, a.measured);

    const auto dir = create_run_dir(run_root(root_flag), "bench");
    auto manifest = base_manifest("bench", s);
    manifest["options"] = {{"warmup", a.warmup}, {"measured", a.measured}};
    manifest["artifacts"] = {{"report", "bench.json"}, {"epochs", "bench.csv"}};
    write_json(dir / "manifest.json", manifest);
    const nlohmann::json report = {{"schema_version", kReportSchemaVersion},
                                   {"median_epoch_ms", t.median_epoch_ms},
                                   {"epoch_ms", t.epoch_ms},
                                   {"peak_memory_bytes", t.peak_memory_bytes},
                                   {"allocation_tracking", alloc::tracking_enabled()},
                                   {"hardware", t.hardware},
                                   {"vocab_size", graph.vocab_size()},
                                   {"graph_nnz", graph.adjacency.nnz()},
                                   {"train_docs", ex.data.x_train.rows()},
                                   {"hidden_dim", s.train.hidden_dim}};
    write_json(dir / "bench.json", report);
    std::string csv = "schema_version,epoch,ms\n";
    for (std::size_t i = 0; i < t.epoch_ms.size(); ++i)
        csv += std::to_string(kReportSchemaVersion) + "," + std::to_string(i + 1) + "," + format_double(t.epoch_ms[i]) + "\n";
    write_file_atomic(dir / "bench.csv", csv);
    std::cout << "run: " << dir.string() << "\n"
              << "median_epoch_ms: " << format_double(t.median_epoch_ms) << "\n"
              << "peak_memory_bytes: " << t.peak_memory_bytes << "\n"
              << "hardware: " << t.hardware << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const HashMismatch& e) {
        std::cerr << "wgcn: refusing to run: " << e.what() << "\n";
        return kMismatch;
    } catch (const FormatError& e) {
        std::cerr << "wgcn: error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "wgcn: error: " << e.what() << "\n";
        return kFailure;
    }
}

inline int run(int argc, char** argv) {
    CLI::App app{"Word-level graph convolution for inductive document classification"};
    app.require_subcommand(1);
    app.fallthrough();  // inherited: --run-root is accepted after the subcommand too
    std::string root_flag;
    app.add_option("--run-root", root_flag, std::string("Directory for run outputs (default $") + kRunRootEnv + " or ./runs)");

    std::function<int()> action;

    // dataset stats
    CommandContext stats_ctx;
    auto* dataset = app.add_subcommand("dataset", "Dataset inspection");
    dataset->require_subcommand(1);
    auto* stats = dataset->add_subcommand("stats", "Print corpus statistics as JSON");
    add_dataset_flags(stats, stats_ctx);
    stats->callback([&] { action = [&] { return cmd_dataset_stats(stats_ctx); }; });

    // build-graph
    CommandContext graph_ctx;
    std::string graph_out, mtx_out;
    auto* bg = app.add_subcommand("build-graph", "Build and save a word graph");
    add_dataset_flags(bg, graph_ctx);
    add_graph_flags(bg, graph_ctx);
    bg->add_option("--out", graph_out, "Output graph file (WGCM binary plus .json sidecar)")->required();
    bg->add_option("--mtx", mtx_out, "Also write the adjacency as MatrixMarket text");
    bg->callback([&] { action = [&] { return cmd_build_graph(graph_ctx, graph_out, mtx_out); }; });

    // train
    CommandContext train_ctx;
    auto* tr = app.add_subcommand("train", "Train a model in a new run directory");
    add_dataset_flags(tr, train_ctx);
    add_graph_flags(tr, train_ctx);
    add_train_flags(tr, train_ctx);
    add_manifest_flags(tr, train_ctx);
    tr->add_option("--graph", train_ctx.graph_path, "Prebuilt graph instead of building one")->check(CLI::ExistingFile);
    tr->callback([&] { action = [&] { return cmd_train(train_ctx, root_flag); }; });

    // predict
    PredictArgs pa;
    auto* pr = app.add_subcommand("predict", "Label documents with a trained model");
    pr->add_option("--run", pa.run_dir, "Run directory holding model.wgcp, graph.wgcm and vocab.tsv")
        ->check(CLI::ExistingDirectory);
    pr->add_option("--checkpoint", pa.checkpoint, "Checkpoint file (overrides --run)");
    pr->add_option("--graph", pa.graph, "Graph file (overrides --run)");
    pr->add_option("--vocab", pa.vocab, "Vocabulary file (overrides --run)");
    pr->add_option("--input", pa.input, "Documents: one per line, optionally id<TAB>text")
        ->required()
        ->check(CLI::ExistingFile);
    pr->add_option("--out", pa.out, "Output file for id<TAB>label lines (default stdout)");
    pr->callback([&] { action = [&] { return cmd_predict(pa); }; });

    // sweep
    CommandContext sweep_ctx;
    SweepArgs sa;
    auto* sw = app.add_subcommand("sweep", "Repeated runs across values of one setting; emits CSV");
    add_dataset_flags(sw, sweep_ctx);
    add_graph_flags(sw, sweep_ctx);
    add_train_flags(sw, sweep_ctx);
    add_manifest_flags(sw, sweep_ctx);
    sw->add_option("--axis", sa.axis, "hidden_dim, window_size or order")
        ->required()
        ->check(CLI::IsMember({"hidden_dim", "window_size", "order"}));
    sw->add_option("--values", sa.values, "Comma-separated values")->required()->delimiter(',');
    sw->add_option("--trials", sa.trials, "Trials per value (seeds seed..seed+trials-1)")->check(CLI::PositiveNumber);
    sw->add_option("--order-kind", sa.order_kind, "For --axis order: lift (citation k) or propagation (n)")
        ->check(CLI::IsMember({"lift", "propagation"}));
    sw->add_option("--out", sa.out, "Also write the CSV here");
    sw->add_flag("--parallel", sa.parallel, "Run trials on separate threads");
    sw->callback([&] { action = [&] { return cmd_sweep(sweep_ctx, sa, root_flag); }; });

    // bench
    CommandContext bench_ctx;
    BenchArgs ba;
    auto* be = app.add_subcommand("bench", "Time training epochs");
    add_dataset_flags(be, bench_ctx);
    add_graph_flags(be, bench_ctx);
    add_train_flags(be, bench_ctx);
    add_manifest_flags(be, bench_ctx);
    be->add_option("--graph", bench_ctx.graph_path, "Prebuilt graph instead of building one")->check(CLI::ExistingFile);
    be->add_option("--warmup", ba.warmup, "Discarded warm-up epochs");
    be->add_option("--measured", ba.measured, "Measured epochs")->check(CLI::PositiveNumber);
    be->callback([&] { action = [&] { return cmd_bench(bench_ctx, ba, root_flag); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return action ? guarded(action) : kFailure;
}

}  // namespace wgcn::cli
