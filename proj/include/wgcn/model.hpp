#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wgcn/dense_matrix.hpp"
#include "wgcn/random.hpp"
#include "wgcn/sparse_matrix.hpp"
#include "wgcn/word_graph.hpp"

namespace wgcn {

enum class Activation { identity, relu };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation parse_activation(std::string_view s) {
    if (s == "identity" || s == "linear") return Activation::identity;
    if (s == "relu") return Activation::relu;
    throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

/// Hyperparameters. Defaults are the best reported text-classification
/// settings.
struct TrainConfig {
    double learning_rate = 0.018;
    double dropout_rate = 0.6;
    double weight_decay = 5e-5;
    std::size_t max_epochs = 800;
    std::size_t early_stop_patience = 10;
    bool early_stopping = true;
    std::size_t propagation_order = 1;
    std::size_t hidden_dim = 200;
    /// Applied once to the propagated word representations; the classifier
    /// head always uses ReLU.
    Activation activation = Activation::identity;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("learning_rate must be finite and non-negative");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout_rate must be in [0, 1)");
        if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
            throw std::invalid_argument("weight_decay must be finite and non-negative");
        if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be at least 1");
        if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be at least 1");
    }
};

/// Settings used for the citation benchmarks: 1000 epochs, no early stop.
inline TrainConfig citation_train_defaults() {
    TrainConfig c;
    c.max_epochs = 1000;
    c.early_stopping = false;
    return c;
}

struct ModelParams {
    DenseMatrix w0;           // vocabulary x hidden
    DenseMatrix w1;           // hidden x classes
    std::vector<double> b1;   // classes

    std::size_t vocab_size() const noexcept { return w0.rows(); }
    std::size_t hidden_dim() const noexcept { return w0.cols(); }
    std::size_t num_classes() const noexcept { return w1.cols(); }

    void check_shapes() const {
        if (w1.rows() != w0.cols() || b1.size() != w1.cols())
            throw std::invalid_argument("ModelParams: inconsistent parameter shapes");
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

inline void glorot_fill(DenseMatrix& m, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double& v : m.values()) v = rng.uniform(-limit, limit);
}

}  // namespace detail

/// Glorot-uniform W0 and W1, zero bias.
inline ModelParams init_params(std::size_t vocab_size, std::size_t hidden_dim, std::size_t num_classes,
                               std::uint64_t seed) {
    ModelParams p{DenseMatrix(vocab_size, hidden_dim), DenseMatrix(hidden_dim, num_classes),
                  std::vector<double>(num_classes, 0.0)};
    Rng rng(mix_seed(seed));
    detail::glorot_fill(p.w0, rng);
    detail::glorot_fill(p.w1, rng);
    return p;
}

struct Gradients {
    DenseMatrix w0;
    DenseMatrix w1;
    std::vector<double> b1;
};

inline void apply_activation(DenseMatrix& m, Activation a) {
    if (a == Activation::relu)
        for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

/// Ã^n W0 as n sparse products (the identity word features are implicit).
inline DenseMatrix propagate_linear(const WordGraph& graph, const DenseMatrix& w0, std::size_t n) {
    if (!graph.adjacency.is_square() || graph.adjacency.cols() != w0.rows()) {
        throw std::invalid_argument("propagate: graph is " + std::to_string(graph.adjacency.rows()) + "x" +
                                    std::to_string(graph.adjacency.cols()) + " but W0 has " +
                                    std::to_string(w0.rows()) + " rows");
    }
    DenseMatrix h = w0;
    for (std::size_t step = 0; step < n; ++step) h = spmm(graph.adjacency, h);
    return h;
}

/// H_vm = activation(Ã^n W0); the activation follows all n steps.
inline DenseMatrix propagate_words(const WordGraph& graph, const DenseMatrix& w0, std::size_t n, Activation act) {
    DenseMatrix h = propagate_linear(graph, w0, n);
    apply_activation(h, act);
    return h;
}

inline void softmax_rows(DenseMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double peak = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - peak);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

struct ForwardResult {
    DenseMatrix h_dm;    // document representations X H_vm
    DenseMatrix hidden;  // ReLU(h_dm)
    DenseMatrix logits;
    DenseMatrix probs;
};

/// Document-side head: probs = softmax(ReLU(X H_vm) W1 + b1).
inline ForwardResult forward(const SparseMatrix& x, const DenseMatrix& h_vm, const ModelParams& params) {
    params.check_shapes();
    if (x.cols() != h_vm.rows()) throw std::invalid_argument("forward: feature columns do not match word count");
    if (h_vm.cols() != params.w1.rows()) throw std::invalid_argument("forward: hidden size does not match W1");
    ForwardResult f;
    f.h_dm = spmm(x, h_vm);
    f.hidden = f.h_dm;
    apply_activation(f.hidden, Activation::relu);
    f.logits = matmul(f.hidden, params.w1);
    for (std::size_t r = 0; r < f.logits.rows(); ++r) {
        auto row = f.logits.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += params.b1[j];
    }
    f.probs = f.logits;
    softmax_rows(f.probs);
    return f;
}

struct LossResult {
    double loss = 0.0;  // summed cross-entropy plus L2 penalty
    double cross_entropy = 0.0;
    Gradients grads;
};

inline void check_labels(std::span<const std::size_t> labels, std::size_t rows, std::size_t classes) {
    if (labels.size() != rows) throw std::invalid_argument("labels length does not match batch rows");
    for (auto y : labels)
        if (y >= classes) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
}

/// Loss  sum_i -ln p(y_i | x_i) + weight_decay/2 (|W0|² + |W1|²)  and its
/// exact gradient. `dropout_scale`, when given, multiplies H_vm elementwise
/// (entries 0 or 1/(1-rate)).
inline LossResult loss_and_gradients(const SparseMatrix& x, std::span<const std::size_t> labels,
                                     const WordGraph& graph, const ModelParams& params, const TrainConfig& config,
                                     const DenseMatrix* dropout_scale = nullptr) {
    params.check_shapes();
    check_labels(labels, x.rows(), params.num_classes());

    const std::size_t n = config.propagation_order;
    const DenseMatrix propagated = propagate_linear(graph, params.w0, n);
    DenseMatrix h_vm = propagated;
    apply_activation(h_vm, config.activation);
    if (dropout_scale) {
        if (dropout_scale->rows() != h_vm.rows() || dropout_scale->cols() != h_vm.cols())
            throw std::invalid_argument("dropout mask shape mismatch");
        for (std::size_t i = 0; i < h_vm.size(); ++i) h_vm.values()[i] *= dropout_scale->values()[i];
    }
    const ForwardResult f = forward(x, h_vm, params);

    LossResult out;
    DenseMatrix d_logits = f.probs;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out.cross_entropy -= std::log(f.probs(r, labels[r]));
        d_logits(r, labels[r]) -= 1.0;
    }
    const double wd = config.weight_decay;
    out.loss = out.cross_entropy + 0.5 * wd * (squared_norm(params.w0) + squared_norm(params.w1));

    Gradients& g = out.grads;
    g.w1 = matmul_tn(f.hidden, d_logits);
    g.b1.assign(params.num_classes(), 0.0);
    for (std::size_t r = 0; r < d_logits.rows(); ++r)
        for (std::size_t j = 0; j < d_logits.cols(); ++j) g.b1[j] += d_logits(r, j);

    DenseMatrix d_hidden = matmul_nt(d_logits, params.w1);
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
        if (!(f.h_dm.values()[i] > 0.0)) d_hidden.values()[i] = 0.0;

    DenseMatrix d_h = spmm_tn(x, d_hidden);
    if (dropout_scale)
        for (std::size_t i = 0; i < d_h.size(); ++i) d_h.values()[i] *= dropout_scale->values()[i];
    if (config.activation == Activation::relu)
        for (std::size_t i = 0; i < d_h.size(); ++i)
            if (!(propagated.values()[i] > 0.0)) d_h.values()[i] = 0.0;
    for (std::size_t step = 0; step < n; ++step) d_h = spmm_tn(graph.adjacency, d_h);
    g.w0 = std::move(d_h);

    if (wd != 0.0) {
        for (std::size_t i = 0; i < g.w0.size(); ++i) g.w0.values()[i] += wd * params.w0.values()[i];
        for (std::size_t i = 0; i < g.w1.size(); ++i) g.w1.values()[i] += wd * params.w1.values()[i];
    }
    return out;
}

/// Adam moments for each parameter tensor.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step = 0;
    std::vector<double> m_w0, v_w0, m_w1, v_w1, m_b1, v_b1;

    static AdamState for_params(const ModelParams& p) {
        AdamState s;
        s.m_w0.assign(p.w0.size(), 0.0);
        s.v_w0.assign(p.w0.size(), 0.0);
        s.m_w1.assign(p.w1.size(), 0.0);
        s.v_w1.assign(p.w1.size(), 0.0);
        s.m_b1.assign(p.b1.size(), 0.0);
        s.v_b1.assign(p.b1.size(), 0.0);
        return s;
    }
};

namespace detail {

inline void adam_update(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                        std::vector<double>& v, const AdamState& s, double lr) {
    if (param.size() != grad.size() || m.size() != param.size() || v.size() != param.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    const auto t = static_cast<double>(s.step);
    const double correction1 = 1.0 - std::pow(s.beta1, t);
    const double correction2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

}  // namespace detail

/// One bias-corrected Adam update of every parameter tensor.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr) {
    ++state.step;
    detail::adam_update(params.w0.values(), grads.w0.values(), state.m_w0, state.v_w0, state, lr);
    detail::adam_update(params.w1.values(), grads.w1.values(), state.m_w1, state.v_w1, state, lr);
    detail::adam_update(params.b1, grads.b1, state.m_b1, state.v_b1, state, lr);
}

/// Row-wise argmax; ties go to the lowest class index.
inline std::vector<std::size_t> argmax_rows(const DenseMatrix& probs) {
    std::vector<std::size_t> out(probs.rows(), 0);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;
        out[r] = best;
    }
    return out;
}

/// Class probabilities for documents projected onto the training vocabulary;
/// the documents need not have taken part in building the graph.
inline DenseMatrix predict_proba(const SparseMatrix& x, const WordGraph& graph, const ModelParams& params,
                                 const TrainConfig& config) {
    if (x.cols() != params.vocab_size()) {
        throw std::invalid_argument("predict: documents have " + std::to_string(x.cols()) +
                                    " feature columns, model expects " + std::to_string(params.vocab_size()));
    }
    const DenseMatrix h_vm = propagate_words(graph, params.w0, config.propagation_order, config.activation);
    return forward(x, h_vm, params).probs;
}

inline std::vector<std::size_t> predict(const SparseMatrix& x, const WordGraph& graph, const ModelParams& params,
                                        const TrainConfig& config) {
    return argmax_rows(predict_proba(x, graph, params, config));
}

struct TrainData {
    SparseMatrix x_train;
    std::vector<std::size_t> y_train;
    SparseMatrix x_dev;
    std::vector<std::size_t> y_dev;
    std::size_t num_classes = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double dev_loss = 0.0;  // cross-entropy, no penalty, no dropout
    double dev_accuracy = 0.0;
};

/// Raised when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, double loss)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                             std::to_string(loss) + ")"),
          epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Full-batch training loop, one epoch per call. Deterministic for a seed.
class Trainer {
public:
    Trainer(const TrainData& data, const WordGraph& graph, TrainConfig config)
        : data_(data), graph_(graph), config_(config) {
        config_.validate();
        if (data.x_train.rows() == 0) throw std::invalid_argument("train: empty training split");
        if (data.x_dev.rows() == 0) throw std::invalid_argument("train: empty dev split");
        if (data.x_train.cols() != graph.vocab_size() || data.x_dev.cols() != graph.vocab_size())
            throw std::invalid_argument("train: feature columns do not match graph vocabulary");
        check_labels(data.y_train, data.x_train.rows(), data.num_classes);
        check_labels(data.y_dev, data.x_dev.rows(), data.num_classes);
        params_ = init_params(graph.vocab_size(), config_.hidden_dim, data.num_classes, config_.seed);
        best_ = params_;
        adam_ = AdamState::for_params(params_);
        dropout_rng_ = Rng(mix_seed(config_.seed ^ 0xd50b0d7ULL));
    }

    EpochRecord run_epoch() {
        const std::size_t epoch = history_.size() + 1;
        DenseMatrix mask;
        const bool use_dropout = config_.dropout_rate > 0.0;
        if (use_dropout) {
            mask = DenseMatrix(params_.vocab_size(), params_.hidden_dim());
            const double keep_scale = 1.0 / (1.0 - config_.dropout_rate);
            for (double& v : mask.values()) v = dropout_rng_.uniform() < config_.dropout_rate ? 0.0 : keep_scale;
        }
        const LossResult lr = loss_and_gradients(data_.x_train, data_.y_train, graph_, params_, config_,
                                                 use_dropout ? &mask : nullptr);
        if (!std::isfinite(lr.loss)) throw TrainingDiverged(epoch, lr.loss);
        adam_step(params_, lr.grads, adam_, config_.learning_rate);

        const DenseMatrix probs = predict_proba(data_.x_dev, graph_, params_, config_);
        const auto predicted = argmax_rows(probs);
        std::size_t correct = 0;
        double dev_loss = 0.0;
        for (std::size_t r = 0; r < predicted.size(); ++r) {
            correct += predicted[r] == data_.y_dev[r];
            dev_loss -= std::log(probs(r, data_.y_dev[r]));
        }
        EpochRecord rec{epoch, lr.loss, dev_loss,
                        static_cast<double>(correct) / static_cast<double>(predicted.size())};
        history_.push_back(rec);

        if (rec.dev_accuracy > best_accuracy_) {
            best_accuracy_ = rec.dev_accuracy;
            best_ = params_;
            best_epoch_ = epoch;
            stale_epochs_ = 0;
        } else {
            ++stale_epochs_;
        }
        return rec;
    }

    bool finished() const {
        if (history_.size() >= config_.max_epochs) return true;
        return config_.early_stopping && stale_epochs_ >= config_.early_stop_patience;
    }

    const ModelParams& current_params() const noexcept { return params_; }
    /// Parameters from the epoch with the highest dev accuracy (the initial
    /// parameters before any epoch has run).
    const ModelParams& best_params() const noexcept { return best_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    const std::vector<EpochRecord>& history() const noexcept { return history_; }
    const TrainConfig& config() const noexcept { return config_; }

private:
    const TrainData& data_;
    const WordGraph& graph_;
    TrainConfig config_;
    ModelParams params_;
    ModelParams best_;
    AdamState adam_;
    Rng dropout_rng_{0};
    std::vector<EpochRecord> history_;
    double best_accuracy_ = -1.0;
    std::size_t best_epoch_ = 0;
    std::size_t stale_epochs_ = 0;
};

struct TrainResult {
    ModelParams params;  // best-dev checkpoint
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

inline TrainResult train(const TrainData& data, const WordGraph& graph, const TrainConfig& config) {
    Trainer trainer(data, graph, config);
    while (!trainer.finished()) trainer.run_epoch();
    return {trainer.best_params(), trainer.history(), trainer.best_epoch()};
}

enum class LinearizedMode { gram, citation };

/// Document-side evaluation of the linear model: X̂ Xᵀ (X Xᵀ)^{n-1} X W0 in
/// gram mode, X̂ Xᵀ A^n X W0 in citation mode (A as given, typically the
/// normalized citation adjacency). No normalization of the gram matrices.
inline DenseMatrix linearized_forward_oracle(const SparseMatrix& x_hat, const SparseMatrix& x_train,
                                             const DenseMatrix& w0, std::size_t n, LinearizedMode mode,
                                             const SparseMatrix* doc_adjacency = nullptr) {
    if (x_hat.cols() != x_train.cols() || x_train.cols() != w0.rows())
        throw std::invalid_argument("linearized_forward_oracle: shape mismatch");
    const SparseMatrix x_t = x_train.transpose();
    const SparseMatrix similarity = sp_sp_mm(x_hat, x_t);  // X̂ Xᵀ
    DenseMatrix chain = spmm(x_train, w0);                // X W0
    if (mode == LinearizedMode::gram) {
        if (n < 1) throw std::invalid_argument("linearized_forward_oracle: gram mode needs n >= 1");
        const SparseMatrix doc_gram = sp_sp_mm(x_train, x_t);
        for (std::size_t step = 1; step < n; ++step) chain = spmm(doc_gram, chain);
    } else {
        if (!doc_adjacency || doc_adjacency->rows() != x_train.rows() || !doc_adjacency->is_square())
            throw std::invalid_argument("linearized_forward_oracle: citation mode needs a d x d adjacency");
        for (std::size_t step = 0; step < n; ++step) chain = spmm(*doc_adjacency, chain);
    }
    return spmm(similarity, chain);
}

}  // namespace wgcn
