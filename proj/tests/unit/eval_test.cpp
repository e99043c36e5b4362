#include <gtest/gtest.h>

#include <cmath>

#include "oracle/oracle.hpp"
#include "support/planted.hpp"
#include "wgcn/eval.hpp"

using namespace wgcn;

namespace {

const testing_support::PlantedSetup& planted() {
    static const auto s = [] {
        oracle::PlantedCorpusSpec spec;
        spec.docs_per_class = 45;
        GraphOptions go;
        go.window_size = 10;
        return testing_support::planted_setup(spec, go);
    }();
    return s;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.hidden_dim = 32;
    c.max_epochs = 60;
    c.learning_rate = 0.05;
    return c;
}

}  // namespace

TEST(Accuracy, HandExamples) {
    const std::vector<std::size_t> y = {0, 1, 2, 1};
    EXPECT_EQ(accuracy(y, y), 1.0);
    EXPECT_EQ(accuracy(std::vector<std::size_t>{1, 0, 0, 0}, y), 0.0);
    EXPECT_EQ(accuracy(std::vector<std::size_t>{0, 1, 2, 0}, y), 0.75);
    EXPECT_THROW(accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), std::invalid_argument);
    EXPECT_THROW(accuracy(std::vector<std::size_t>{0}, y), std::invalid_argument);
}

TEST(Accuracy, PerClassPrecisionRecall) {
    const std::vector<std::size_t> pred = {0, 0, 1, 1}, y = {0, 1, 1, 1};
    const auto m = per_class_metrics(pred, y, 3);
    EXPECT_EQ(m.precision, (std::vector<double>{0.5, 1.0, 0.0}));
    EXPECT_DOUBLE_EQ(m.recall[0], 1.0);
    EXPECT_DOUBLE_EQ(m.recall[1], 2.0 / 3.0);
    EXPECT_EQ(m.recall[2], 0.0);
}

TEST(Statistics, SampleStandardDeviation) {
    const std::vector<double> two = {0.5, 1.0};
    const auto s = mean_stddev(two);
    EXPECT_DOUBLE_EQ(s.mean, 0.75);
    EXPECT_NEAR(s.stddev, std::sqrt(0.125), 1e-15);
    EXPECT_NEAR(s.stddev, 0.3536, 1e-4);
    const std::vector<double> same = {0.8, 0.8, 0.8};
    EXPECT_EQ(mean_stddev(same).stddev, 0.0);
    EXPECT_EQ(mean_stddev(std::vector<double>{0.4}).stddev, 0.0);
    EXPECT_THROW(mean_stddev(std::vector<double>{}), std::invalid_argument);
}

TEST(RepeatedRuns, PlantedCorpusMeanAccuracyAndSeedRecording) {
    const auto& s = planted();
    auto cfg = quick_config();
    cfg.seed = 40;
    const auto rr = repeated_runs(cfg, s.experiment, s.graph, 10);
    EXPECT_GE(rr.accuracy.mean, 0.95);
    ASSERT_EQ(rr.reports.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(rr.reports[i].seed, 40 + i);
        EXPECT_GT(rr.reports[i].epochs_run, 0u);
        EXPECT_GE(rr.reports[i].wall_time_per_epoch_ms, 0.0);
    }
    // Summary is a pure function of the saved per-trial reports.
    std::vector<double> from_json;
    for (const auto& r : rr.reports) from_json.push_back(nlohmann::json::parse(to_json(r).dump())["accuracy"]);
    const auto again = mean_stddev(from_json);
    EXPECT_EQ(again.mean, rr.accuracy.mean);
    EXPECT_EQ(again.stddev, rr.accuracy.stddev);
}

TEST(RepeatedRuns, ParallelTrialsMatchSequential) {
    const auto& s = planted();
    auto cfg = quick_config();
    cfg.max_epochs = 10;
    const auto a = repeated_runs(cfg, s.experiment, s.graph, 3, false);
    const auto b = repeated_runs(cfg, s.experiment, s.graph, 3, true);
    EXPECT_EQ(a.accuracies(), b.accuracies());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.reports[i].epochs_run, b.reports[i].epochs_run);
}

TEST(OrderSweep, OrderZeroMatchesSingleMlpRun) {
    const auto& s = planted();
    auto cfg = quick_config();
    const std::vector<std::size_t> orders = {0};
    const auto rows = order_sweep(cfg, s.experiment, [&](std::size_t) { return s.graph; }, orders, 1,
                                  OrderAxis::propagation);
    ASSERT_EQ(rows.size(), 1u);
    cfg.propagation_order = 0;
    EXPECT_EQ(rows[0].mean, run_trial(cfg, s.experiment, s.graph).accuracy);
    EXPECT_EQ(rows[0].axis, "order");
    EXPECT_THROW(order_sweep(cfg, s.experiment, [&](std::size_t) { return s.graph; }, std::vector<std::size_t>{}, 1,
                             OrderAxis::propagation),
                 std::invalid_argument);
}

TEST(SweepCsv, RoundTripIsExact) {
    const std::vector<SweepRow> rows = {{"order", 0, 0.9, 0.01, {0.89, 0.91}},
                                        {"order", 1, 1.0 / 3.0, 0.1 + 0.2, {1.0 / 3.0}},
                                        {"hidden_dim", 200, 0.5, 0.0, {}}};
    const auto text = emit_sweep_csv(rows);
    EXPECT_EQ(text.substr(0, text.find('\n')), "schema_version,axis,value,mean,stddev,trials");
    EXPECT_EQ(parse_sweep_csv(text), rows);
    EXPECT_NE(text.find("0.30000000000000004"), std::string::npos);
    EXPECT_THROW(parse_sweep_csv("axis,value\n"), FormatError);
    EXPECT_THROW(parse_sweep_csv(std::string(kSweepHeader) + "\n2,order,0,0,0,\n"), FormatError);
}

TEST(Timing, RepeatedMeasurementIsSelfConsistent) {
    const auto& s = planted();
    auto cfg = quick_config();
    cfg.hidden_dim = 200;
    const auto a = timing_harness(cfg, s.experiment.data, s.graph);
    const auto b = timing_harness(cfg, s.experiment.data, s.graph);
    EXPECT_EQ(a.epoch_ms.size(), 10u);
    EXPECT_GT(a.median_epoch_ms, 0.0);
    EXPECT_FALSE(a.hardware.empty());
    EXPECT_LT(std::abs(a.median_epoch_ms - b.median_epoch_ms), 0.2 * std::max(a.median_epoch_ms, b.median_epoch_ms));
}

TEST(Timing, EpochTimeGrowsWithHiddenDim) {
    const auto& s = planted();
    std::vector<double> t;
    for (std::size_t m : {50u, 100u, 200u}) {
        auto cfg = quick_config();
        cfg.hidden_dim = m;
        t.push_back(timing_harness(cfg, s.experiment.data, s.graph).median_epoch_ms);
    }
    EXPECT_LT(t[0], t[2]);
    EXPECT_LT(t[0], 1.2 * t[1]);
    EXPECT_LT(t[1], 1.2 * t[2]);
}

TEST(Timing, EmptyFeatureCorpusStillReportsPositiveTime) {
    TrainData d;
    d.x_train = SparseMatrix::zeros(4, 3);
    d.y_train = {0, 1, 0, 1};
    d.x_dev = SparseMatrix::zeros(2, 3);
    d.y_dev = {0, 1};
    d.num_classes = 2;
    WordGraph g;
    g.adjacency = SparseMatrix::identity(3);
    auto cfg = quick_config();
    const auto r = timing_harness(cfg, d, g, 1, 3);
    EXPECT_GT(r.median_epoch_ms, 0.0);
    EXPECT_TRUE(std::isfinite(r.median_epoch_ms));
    EXPECT_EQ(median({3.0, 1.0, 2.0, 10.0}), 2.5);
}
