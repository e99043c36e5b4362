#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracle/oracle.hpp"
#include "support/bridge.hpp"
#include "support/gradcheck.hpp"
#include "support/planted.hpp"
#include "wgcn/checkpoint.hpp"
#include "wgcn/model.hpp"

using namespace wgcn;
using testing_support::to_dense;
using testing_support::to_oracle;
using testing_support::to_sparse;

namespace {

WordGraph graph_of(const oracle::Dense& a) {
    WordGraph g;
    g.adjacency = to_sparse(a, a.size());
    return g;
}

WordGraph random_graph(std::size_t v, std::uint64_t seed) {
    return graph_of(to_oracle(normalize_symmetric(to_sparse(oracle::random_symmetric_adjacency(v, 0.4, seed), v), true)));
}

ModelParams zero_params(std::size_t v, std::size_t m, std::size_t c) {
    return {DenseMatrix(v, m), DenseMatrix(m, c), std::vector<double>(c, 0.0)};
}

oracle::PlantedCorpusSpec two_class_disjoint() {
    oracle::PlantedCorpusSpec s;
    s.num_classes = 2;
    s.docs_per_class = 40;
    s.overlap_fraction = 0.0;
    s.train_fraction = 0.5;
    s.dev_fraction = 0.25;
    return s;
}

GraphOptions npmi_options() {
    GraphOptions o;
    o.window_size = 10;
    return o;
}

}  // namespace

TEST(Propagate, OrderZeroIsActivationOfW0) {
    const auto w0 = to_dense(oracle::random_dense(6, 3, 1));
    const auto g = random_graph(6, 2);
    EXPECT_EQ(propagate_words(g, w0, 0, Activation::identity), w0);
    auto relu = w0;
    apply_activation(relu, Activation::relu);
    EXPECT_EQ(propagate_words(g, w0, 0, Activation::relu), relu);
}

TEST(Propagate, IdentityGraphLeavesW0) {
    const auto w0 = to_dense(oracle::random_dense(4, 2, 3));
    const auto g = graph_of(oracle::identity(4));
    for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(propagate_words(g, w0, n, Activation::identity), w0);
}

TEST(Propagate, TwoStepsMatchDenseOracle) {
    const auto a = to_oracle(random_graph(6, 4).adjacency);
    const auto w0 = oracle::random_dense(6, 3, 5);
    const auto got = propagate_words(graph_of(a), to_dense(w0), 2, Activation::identity);
    EXPECT_LT(oracle::max_abs_diff(to_oracle(got), oracle::multiply(a, oracle::multiply(a, w0))), 1e-12);
    EXPECT_THROW(propagate_words(graph_of(a), DenseMatrix(5, 3), 1, Activation::identity), std::invalid_argument);
}

TEST(Forward, ZeroHiddenGivesBiasLogits) {
    auto p = zero_params(4, 2, 3);
    p.b1 = {0.5, -1.0, 2.0};
    const auto x = to_sparse(oracle::random_sparse(3, 4, 0.6, 1, 0.1, 1.0), 4);
    const auto f = forward(x, DenseMatrix(4, 2), p);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f.logits(r, j), p.b1[j]);
    p.b1.assign(3, 0.0);
    const auto u = forward(x, DenseMatrix(4, 2), p);
    for (double v : u.probs.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Forward, OneHotRowSelectsWord) {
    const auto h = to_dense(oracle::random_dense(5, 3, 6));
    const auto x = SparseMatrix::from_triplets(1, 5, {{0, 3, 1.0}});
    const auto f = forward(x, h, zero_params(5, 3, 2));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f.h_dm(0, j), h(3, j));
}

TEST(Forward, RandomInstanceMatchesOracleAndRowsSumToOne) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = oracle::random_sparse(7, 6, 0.5, seed, 0.0, 2.0);
        const auto h = oracle::random_dense(6, 4, seed + 1);
        const auto w1 = oracle::random_dense(4, 3, seed + 2);
        const auto b1 = oracle::random_dense(1, 3, seed + 3)[0];
        const auto f = forward(to_sparse(x, 6), to_dense(h), {DenseMatrix(6, 4), to_dense(w1), b1});
        EXPECT_LT(oracle::max_abs_diff(to_oracle(f.probs), oracle::forward_probs(x, h, w1, b1)), 1e-10);
        for (std::size_t r = 0; r < 7; ++r) {
            double s = 0.0;
            for (double v : f.probs.row(r)) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(Forward, SoftmaxIsStableForLargeLogits) {
    DenseMatrix m(1, 2, {1000.0, 999.0});
    softmax_rows(m);
    EXPECT_TRUE(m.all_finite());
    EXPECT_NEAR(m(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Loss, UniformStartIsBatchTimesLogC) {
    const auto x = to_sparse(oracle::random_sparse(6, 5, 0.5, 2, 0.0, 1.0), 5);
    const std::vector<std::size_t> y = {0, 1, 2, 3, 0, 1};
    TrainConfig cfg;
    const auto r = loss_and_gradients(x, y, random_graph(5, 1), zero_params(5, 3, 4), cfg);
    EXPECT_NEAR(r.loss, 6.0 * std::log(4.0), 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionApproachesZero) {
    auto p = zero_params(2, 1, 2);
    p.b1 = {30.0, 0.0};
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    const auto x = SparseMatrix::from_triplets(1, 2, {{0, 0, 1.0}});
    const std::vector<std::size_t> y = {0};
    const double loss = loss_and_gradients(x, y, graph_of(oracle::identity(2)), p, cfg).loss;
    EXPECT_GT(loss, 0.0);
    EXPECT_LT(loss, 1e-12);
}

TEST(Loss, LabelOutOfRangeThrows) {
    const std::vector<std::size_t> y = {3};
    TrainConfig cfg;
    EXPECT_THROW(loss_and_gradients(SparseMatrix::identity(2).select_rows(std::vector<std::size_t>{0}), y,
                                    graph_of(oracle::identity(2)), zero_params(2, 1, 3), cfg),
                 std::invalid_argument);
}

TEST(Gradients, ReferenceInstanceMatchesFiniteDifferences) {
    testing_support::GradCheckCase k;  // v=8, m=4, c=3, n=1, seed 7
    const auto r = testing_support::gradient_check(k);
    EXPECT_EQ(r.entries, 8u * 4 + 4 * 3 + 3);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Gradients, PropertyAcrossOrdersActivationsAndDropout) {
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (std::size_t n : {0u, 2u})
            for (auto act : {Activation::identity, Activation::relu}) {
                testing_support::GradCheckCase k;
                k.seed = 100 + seed;
                k.order = n;
                k.activation = act;
                k.dropout = seed % 2 == 1;
                const auto r = testing_support::gradient_check(k);
                EXPECT_LT(r.max_relative_error, 1e-4)
                    << "seed " << k.seed << " n " << n << " act " << to_string(act);
            }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto p = ModelParams{to_dense(oracle::random_dense(3, 2, 1)), to_dense(oracle::random_dense(2, 2, 2)), {0.1, 0.2}};
    const auto before = p;
    auto s = AdamState::for_params(p);
    adam_step(p, {DenseMatrix(3, 2), DenseMatrix(2, 2), {0.0, 0.0}}, s, 0.1);
    EXPECT_EQ(p.w0, before.w0);
    EXPECT_EQ(p.w1, before.w1);
    EXPECT_EQ(p.b1, before.b1);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
    ModelParams p = zero_params(1, 1, 2);
    auto s = AdamState::for_params(p);
    adam_step(p, {DenseMatrix(1, 1, {3.0}), DenseMatrix(1, 2, {-0.5, 2.0}), {1e-3, -7.0}}, s, 0.01);
    // Step is lr * |g| / (|g| + eps): just under lr.
    EXPECT_NEAR(p.w0(0, 0), -0.01, 1e-9);
    EXPECT_NEAR(p.w1(0, 0), 0.01, 1e-9);
    EXPECT_NEAR(p.w1(0, 1), -0.01, 1e-9);
    EXPECT_NEAR(p.b1[0], -0.01, 2e-7);
    EXPECT_NEAR(p.b1[1], 0.01, 1e-9);
    EXPECT_LT(std::abs(p.w0(0, 0)), 0.01);
}

TEST(Adam, ThreeStepsMatchScalarOracle) {
    auto p = ModelParams{to_dense(oracle::random_dense(3, 2, 4)), to_dense(oracle::random_dense(2, 2, 5)), {0.3, -0.3}};
    const Gradients g{to_dense(oracle::random_dense(3, 2, 6)), to_dense(oracle::random_dense(2, 2, 7)), {0.5, -2.0}};
    std::vector<double> theta(p.w0.values().begin(), p.w0.values().end());
    std::vector<oracle::ScalarAdam> scalar(theta.size());
    auto s = AdamState::for_params(p);
    for (int step = 0; step < 3; ++step) {
        adam_step(p, g, s, 0.05);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = scalar[i].step(theta[i], g.w0.values()[i], 0.05);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(p.w0.values()[i], theta[i], 1e-15);
}

TEST(Init, GlorotBoundsAndSeeding) {
    const auto a = init_params(30, 20, 4, 11);
    const auto b = init_params(30, 20, 4, 11);
    const auto c = init_params(30, 20, 4, 12);
    EXPECT_EQ(a.w0, b.w0);
    EXPECT_NE(a.w0, c.w0);
    const double bound0 = std::sqrt(6.0 / 50.0), bound1 = std::sqrt(6.0 / 24.0);
    for (double v : a.w0.values()) EXPECT_LE(std::abs(v), bound0);
    for (double v : a.w1.values()) EXPECT_LE(std::abs(v), bound1);
    for (double v : a.b1) EXPECT_EQ(v, 0.0);
}

TEST(Config, ValidationRejectsBadValues) {
    TrainConfig c;
    c.dropout_rate = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.early_stop_patience = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.learning_rate = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Predict, UniformProbabilitiesPickClassZero) {
    const auto x = to_sparse(oracle::random_sparse(5, 4, 0.5, 8, 0.0, 1.0), 4);
    const auto pred = predict(x, random_graph(4, 3), zero_params(4, 2, 3), TrainConfig{});
    EXPECT_EQ(pred, std::vector<std::size_t>(5, 0));
    EXPECT_THROW(predict(SparseMatrix::zeros(1, 3), random_graph(4, 3), zero_params(4, 2, 3), TrainConfig{}),
                 std::invalid_argument);
}

TEST(Linearization, GramOrderOneIsAssociativity) {
    const auto xh = to_sparse(oracle::random_sparse(3, 4, 0.6, 1, 0.0, 1.0), 4);
    const auto x = to_sparse(oracle::random_sparse(5, 4, 0.6, 2, 0.0, 1.0), 4);
    const auto w0 = to_dense(oracle::random_dense(4, 2, 3));
    WordGraph g;
    g.adjacency = cooccurrence_gram(x);
    const auto word_side = spmm(xh, propagate_words(g, w0, 1, Activation::identity));
    const auto doc_side = linearized_forward_oracle(xh, x, w0, 1, LinearizedMode::gram);
    EXPECT_LT(max_abs_diff(word_side, doc_side), 1e-9);
    EXPECT_THROW(linearized_forward_oracle(xh, x, w0, 0, LinearizedMode::gram), std::invalid_argument);
}

TEST(Linearization, GramOrderTwoMatchesDenseEvaluation) {
    const auto xh = oracle::random_sparse(5, 4, 0.6, 10, 0.0, 1.0);
    const auto x = oracle::random_sparse(5, 4, 0.6, 11, 0.0, 1.0);
    const auto w0 = oracle::random_dense(4, 3, 12);
    const auto xt = oracle::transpose(x);
    const auto word_dense = oracle::multiply(xh, oracle::multiply(oracle::power(oracle::multiply(xt, x), 2), w0));
    const auto doc_dense = oracle::multiply(oracle::multiply(xh, xt),
                                            oracle::multiply(oracle::multiply(x, xt), oracle::multiply(x, w0)));
    EXPECT_LT(oracle::max_abs_diff(word_dense, doc_dense), 1e-9);
    const auto got = linearized_forward_oracle(to_sparse(xh, 4), to_sparse(x, 4), to_dense(w0), 2, LinearizedMode::gram);
    EXPECT_LT(oracle::max_abs_diff(to_oracle(got), doc_dense), 1e-9);
    WordGraph g;
    g.adjacency = cooccurrence_gram(to_sparse(x, 4));
    EXPECT_LT(max_abs_diff(spmm(to_sparse(xh, 4), propagate_words(g, to_dense(w0), 2, Activation::identity)), got), 1e-9);
}

TEST(Linearization, CitationOrderOneMatchesWordSide) {
    const auto xh = to_sparse(oracle::random_sparse(4, 6, 0.5, 20, 0.0, 1.0), 6);
    const auto x = to_sparse(oracle::random_sparse(7, 6, 0.5, 21, 0.0, 1.0), 6);
    const CitationGraph cg{to_sparse(oracle::random_symmetric_adjacency(7, 0.4, 22), 7)};
    const auto w0 = to_dense(oracle::random_dense(6, 3, 23));
    WordGraph g;
    g.adjacency = citation_lift(x, cg, 1);
    const auto word_side = spmm(xh, propagate_words(g, w0, 1, Activation::identity));
    const auto a_norm = normalize_symmetric(cg.adjacency, true);
    const auto doc_side = linearized_forward_oracle(xh, x, w0, 1, LinearizedMode::citation, &a_norm);
    EXPECT_LT(max_abs_diff(word_side, doc_side), 1e-9);
    EXPECT_THROW(linearized_forward_oracle(xh, x, w0, 1, LinearizedMode::citation), std::invalid_argument);
}

TEST(Train, SeparableCorpusReachesPerfectDevAccuracy) {
    const auto s = testing_support::planted_setup(two_class_disjoint(), npmi_options());
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.hidden_dim = 32;
    cfg.early_stopping = false;
    const auto r = train(s.experiment.data, s.graph, cfg);
    double best = 0.0;
    for (const auto& e : r.history) best = std::max(best, e.dev_accuracy);
    EXPECT_EQ(best, 1.0);
    EXPECT_LE(r.history.size(), 50u);
    // Held-out documents get their planted class.
    const auto pred = predict(s.experiment.x_test, s.graph, r.params, cfg);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == s.experiment.y_test[i];
    EXPECT_EQ(correct, pred.size());
}

TEST(Train, PatienceOneWithZeroLearningRateStopsAfterTwoEpochs) {
    const auto s = testing_support::planted_setup(two_class_disjoint(), npmi_options());
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.early_stop_patience = 1;
    cfg.hidden_dim = 8;
    const auto r = train(s.experiment.data, s.graph, cfg);
    EXPECT_EQ(r.history.size(), 2u);
    EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Train, IdenticalSeedsGiveBitwiseIdenticalHistory) {
    const auto s = testing_support::planted_setup(two_class_disjoint(), npmi_options());
    TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.hidden_dim = 16;
    cfg.seed = 5;
    const auto a = train(s.experiment.data, s.graph, cfg);
    const auto b = train(s.experiment.data, s.graph, cfg);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].dev_loss, b.history[i].dev_loss);
        EXPECT_EQ(a.history[i].dev_accuracy, b.history[i].dev_accuracy);
    }
    EXPECT_EQ(encode_params(a.params), encode_params(b.params));
    // Re-feeding training documents reproduces the train-time prediction.
    EXPECT_EQ(predict(s.experiment.data.x_train, s.graph, a.params, cfg),
              predict(s.experiment.data.x_train, s.graph, b.params, cfg));
}

TEST(Train, MedianLossNonIncreasingOverFirstTenEpochs) {
    auto spec = two_class_disjoint();
    spec.overlap_fraction = 0.3;
    const auto s = testing_support::planted_setup(spec, npmi_options());
    std::vector<std::vector<double>> losses(10);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TrainConfig cfg;
        cfg.learning_rate = 0.01;
        cfg.dropout_rate = 0.0;
        cfg.max_epochs = 10;
        cfg.early_stopping = false;
        cfg.hidden_dim = 16;
        cfg.seed = seed;
        const auto r = train(s.experiment.data, s.graph, cfg);
        for (std::size_t e = 0; e < 10; ++e) losses[e].push_back(r.history[e].train_loss);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (auto& l : losses) {
        std::sort(l.begin(), l.end());
        const double med = 0.5 * (l[4] + l[5]);
        EXPECT_LE(med, prev);
        prev = med;
    }
}

TEST(Train, RejectsEmptySplitsAndMismatchedFeatures) {
    TrainData d;
    d.x_train = SparseMatrix::zeros(0, 3);
    d.x_dev = SparseMatrix::identity(3);
    d.y_dev = {0, 0, 0};
    d.num_classes = 1;
    EXPECT_THROW(train(d, graph_of(oracle::identity(3)), TrainConfig{}), std::invalid_argument);
    d.x_train = SparseMatrix::identity(3);
    d.y_train = {0, 0, 0};
    EXPECT_THROW(train(d, graph_of(oracle::identity(4)), TrainConfig{}), std::invalid_argument);
}

TEST(Train, DivergenceNamesTheEpoch) {
    TrainData d;
    d.x_train = SparseMatrix::from_triplets(1, 2, {{0, 0, 1.0}});
    d.y_train = {1};
    d.x_dev = d.x_train;
    d.y_dev = {1};
    d.num_classes = 2;
    TrainConfig cfg;
    cfg.hidden_dim = 2;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 1e300;  // the first step pushes the L2 penalty past overflow
    try {
        train(d, graph_of(oracle::identity(2)), cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingDiverged& e) {
        EXPECT_EQ(e.epoch(), 2u);
        EXPECT_NE(std::string(e.what()).find("epoch 2"), std::string::npos);
    }
}

TEST(Checkpoint, RoundTripAndTamperDetection) {
    const auto dir = testing_support::temp_dir("ckpt");
    const auto p = init_params(6, 3, 2, 4);
    CheckpointInfo info;
    info.config.hidden_dim = 3;
    info.config.activation = Activation::relu;
    info.graph_hash = "g";
    info.vocab_hash = "v";
    info.label_names = {"x", "y"};
    save_checkpoint(dir / "m.wgcp", p, info);
    const auto [q, qi] = load_checkpoint(dir / "m.wgcp");
    EXPECT_EQ(q.w0, p.w0);
    EXPECT_EQ(q.w1, p.w1);
    EXPECT_EQ(q.b1, p.b1);
    EXPECT_EQ(qi.config.activation, Activation::relu);
    EXPECT_EQ(qi.label_names, info.label_names);
    write_file_atomic(dir / "m.wgcp", encode_params(init_params(6, 3, 2, 5)));
    EXPECT_THROW(load_checkpoint(dir / "m.wgcp"), FormatError);
    EXPECT_THROW(decode_params("WGCX"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, ConfigMergeRejectsUnknownKeys) {
    const auto merged = merge_config(TrainConfig{}, nlohmann::json{{"learning_rate", 0.5}, {"activation", "relu"}});
    EXPECT_EQ(merged.learning_rate, 0.5);
    EXPECT_EQ(merged.activation, Activation::relu);
    EXPECT_EQ(merged.hidden_dim, TrainConfig{}.hidden_dim);
    EXPECT_THROW(merge_config(TrainConfig{}, nlohmann::json{{"learning_rat", 0.5}}), FormatError);
    const auto round = merge_config(TrainConfig{}, to_json(merged));
    EXPECT_EQ(to_json(round), to_json(merged));
}
