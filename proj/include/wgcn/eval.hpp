#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wgcn/alloc_tracking.hpp"
#include "wgcn/io.hpp"
#include "wgcn/model.hpp"

namespace wgcn {

inline double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct ClassMetrics {
    std::vector<double> precision;  // 0 where a class is never predicted
    std::vector<double> recall;     // 0 where a class never occurs
};

inline ClassMetrics per_class_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                      std::size_t num_classes) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("per_class_metrics: length mismatch");
    std::vector<std::size_t> tp(num_classes, 0), predicted(num_classes, 0), actual(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] >= num_classes || labels[i] >= num_classes)
            throw std::invalid_argument("per_class_metrics: class index out of range");
        ++predicted[predictions[i]];
        ++actual[labels[i]];
        tp[labels[i]] += predictions[i] == labels[i];
    }
    ClassMetrics m;
    for (std::size_t c = 0; c < num_classes; ++c) {
        m.precision.push_back(predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0);
        m.recall.push_back(actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0);
    }
    return m;
}

/// Training data plus a held-out test split.
struct Experiment {
    TrainData data;
    SparseMatrix x_test;
    std::vector<std::size_t> y_test;
};

struct RunReport {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    ClassMetrics per_class;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double wall_time_per_epoch_ms = 0.0;
    std::size_t peak_memory_bytes = 0;  // 0 unless allocation tracking is installed
};

inline nlohmann::json to_json(const RunReport& r) {
    return {{"seed", r.seed},
            {"accuracy", r.accuracy},
            {"precision", r.per_class.precision},
            {"recall", r.per_class.recall},
            {"epochs_run", r.epochs_run},
            {"best_epoch", r.best_epoch},
            {"wall_time_per_epoch_ms", r.wall_time_per_epoch_ms},
            {"peak_memory_bytes", r.peak_memory_bytes}};
}

/// Trains once and scores the best-dev parameters on the test split.
inline RunReport run_trial(const TrainConfig& config, const Experiment& ex, const WordGraph& graph,
                           TrainResult* result_out = nullptr) {
    if (ex.x_test.rows() == 0) throw std::invalid_argument("run_trial: empty test split");
    alloc::reset_peak();
    const auto start = std::chrono::steady_clock::now();
    TrainResult result = train(ex.data, graph, config);
    const auto stop = std::chrono::steady_clock::now();
    RunReport r;
    r.seed = config.seed;
    const auto predicted = predict(ex.x_test, graph, result.params, config);
    r.accuracy = accuracy(predicted, ex.y_test);
    r.per_class = per_class_metrics(predicted, ex.y_test, ex.data.num_classes);
    r.epochs_run = result.history.size();
    r.best_epoch = result.best_epoch;
    const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
    r.wall_time_per_epoch_ms = r.epochs_run ? ms / static_cast<double>(r.epochs_run) : 0.0;
    r.peak_memory_bytes = alloc::peak_bytes.load();
    if (result_out) *result_out = std::move(result);
    return r;
}

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
};

inline Summary mean_stddev(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_stddev: no values");
    Summary s;
    // Shifted by the first value so identical inputs give an exact mean and zero spread.
    const double shift = values.front();
    double offset = 0.0;
    for (double v : values) offset += v - shift;
    s.mean = shift + offset / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

struct RepeatedRuns {
    Summary accuracy;
    std::vector<RunReport> reports;

    std::vector<double> accuracies() const {
        std::vector<double> out;
        for (const auto& r : reports) out.push_back(r.accuracy);
        return out;
    }
};

/// Trial i uses seed config.seed + i. With `parallel`, trials run on
/// separate threads; each remains deterministic through its own seed.
inline RepeatedRuns repeated_runs(const TrainConfig& config, const Experiment& ex, const WordGraph& graph,
                                  std::size_t trials, bool parallel = false) {
    if (trials < 1) throw std::invalid_argument("repeated_runs: need at least one trial");
    RepeatedRuns out;
    out.reports.resize(trials);
    auto run = [&](std::size_t i) {
        TrainConfig c = config;
        c.seed = config.seed + i;
        out.reports[i] = run_trial(c, ex, graph);
    };
    if (parallel) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = 0; i < trials; ++i) jobs.push_back(std::async(std::launch::async, run, i));
        for (auto& j : jobs) j.get();
    } else {
        for (std::size_t i = 0; i < trials; ++i) run(i);
    }
    const auto acc = out.accuracies();
    out.accuracy = mean_stddev(acc);
    return out;
}

struct SweepRow {
    std::string axis;
    double value = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> trials;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline constexpr int kSweepSchemaVersion = 1;
inline constexpr std::string_view kSweepHeader = "schema_version,axis,value,mean,stddev,trials";

/// Fixed header; trial values joined by ';'; shortest round-trip numbers.
inline std::string emit_sweep_csv(std::span<const SweepRow> rows) {
    std::string out(kSweepHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(kSweepSchemaVersion) + "," + r.axis + "," + format_double(r.value) + "," +
               format_double(r.mean) + "," + format_double(r.stddev) + ",";
        for (std::size_t i = 0; i < r.trials.size(); ++i) {
            if (i) out += ';';
            out += format_double(r.trials[i]);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<SweepRow> parse_sweep_csv(std::string_view text) {
    const auto lines = split(text, '\n');
    if (lines.empty() || lines[0] != kSweepHeader) throw FormatError("sweep CSV: unexpected header");
    std::vector<SweepRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split(lines[i], ',');
        if (f.size() != 6) throw FormatError("sweep CSV: expected 6 fields on line " + std::to_string(i + 1));
        if (parse_u64(f[0]) != kSweepSchemaVersion) throw FormatError("sweep CSV: unsupported schema version");
        SweepRow r{std::string(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), {}};
        if (!f[5].empty())
            for (auto t : split(f[5], ';')) r.trials.push_back(parse_double(t));
        rows.push_back(std::move(r));
    }
    return rows;
}

/// What a sweep value controls.
struct TrialSetup {
    TrainConfig config;
    WordGraph graph;
};

/// One repeated_runs per value; `setup` maps a value to its config and graph.
inline std::vector<SweepRow> sweep(std::string axis, std::span<const double> values,
                                   const std::function<TrialSetup(double)>& setup, const Experiment& ex,
                                   std::size_t trials, bool parallel = false) {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    std::vector<SweepRow> rows;
    for (double v : values) {
        const TrialSetup s = setup(v);
        const RepeatedRuns rr = repeated_runs(s.config, ex, s.graph, trials, parallel);
        rows.push_back({axis, v, rr.accuracy.mean, rr.accuracy.stddev, rr.accuracies()});
    }
    return rows;
}

enum class OrderAxis {
    propagation,    // order is n, the word-graph power; graph built once
    citation_lift,  // order is k in the citation lift; graph rebuilt per k
};

inline std::vector<SweepRow> order_sweep(const TrainConfig& config, const Experiment& ex,
                                         const std::function<WordGraph(std::size_t)>& graph_builder,
                                         std::span<const std::size_t> orders, std::size_t trials, OrderAxis axis,
                                         bool parallel = false) {
    if (orders.empty()) throw std::invalid_argument("order_sweep: no orders");
    std::vector<double> values(orders.begin(), orders.end());
    std::optional<WordGraph> fixed;
    if (axis == OrderAxis::propagation) fixed = graph_builder(0);
    return sweep(
        "order", values,
        [&](double v) {
            const auto k = static_cast<std::size_t>(v);
            TrialSetup s{config, axis == OrderAxis::propagation ? *fixed : graph_builder(k)};
            if (axis == OrderAxis::propagation) s.config.propagation_order = k;
            return s;
        },
        ex, trials, parallel);
}

inline std::string hardware_descriptor() {
    std::string cpu = "unknown cpu";
    std::ifstream info("/proc/cpuinfo");
    for (std::string line; std::getline(info, line);) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) cpu = line.substr(colon + 2);
            break;
        }
    }
    return cpu + " (" + std::to_string(std::max(1U, std::thread::hardware_concurrency())) + " threads)";
}

struct TimingReport {
    double median_epoch_ms = 0.0;
    std::vector<double> epoch_ms;  // measured epochs only
    std::size_t peak_memory_bytes = 0;
    std::string hardware;
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: no values");
    std::sort(v.begin(), v.end());
    const auto mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Times single training epochs: `warmup` discarded, then the median of
/// `measured`. Early stopping is disabled for the measurement.
inline TimingReport timing_harness(TrainConfig config, const TrainData& data, const WordGraph& graph,
                                   std::size_t warmup = 2, std::size_t measured = 10) {
    if (measured < 1) throw std::invalid_argument("timing_harness: need at least one measured epoch");
    config.early_stopping = false;
    config.max_epochs = warmup + measured;
    alloc::reset_peak();
    Trainer trainer(data, graph, config);
    TimingReport report;
    for (std::size_t e = 0; e < warmup + measured; ++e) {
        const auto start = std::chrono::steady_clock::now();
        trainer.run_epoch();
        const auto stop = std::chrono::steady_clock::now();
        if (e >= warmup) report.epoch_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    report.median_epoch_ms = median(report.epoch_ms);
    report.peak_memory_bytes = alloc::peak_bytes.load();
    report.hardware = hardware_descriptor();
    return report;
}

}  // namespace wgcn
