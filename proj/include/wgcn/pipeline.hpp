#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wgcn/corpus.hpp"
#include "wgcn/eval.hpp"
#include "wgcn/word_graph.hpp"

// Glue from an ingested corpus to graphs and train/test matrices.

namespace wgcn {

struct GraphOptions {
    GraphKind kind = GraphKind::npmi;
    std::size_t window_size = 20;
    double threshold = 0.0;
    std::size_t lift_order = 1;
    /// Weighting of X in the gram and citation-lift products.
    Weighting product_weighting = Weighting::count;
    /// Citation lift over every node's features (the citation-benchmark
    /// convention) rather than the training rows only.
    bool lift_all_nodes = true;
    bool normalize = true;
};

inline std::vector<std::size_t> labels_of(const Corpus& c, std::span<const std::size_t> ids) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(c.split.labels[id]);
    return out;
}

inline Experiment make_experiment(const Corpus& c) {
    Experiment ex;
    ex.data.x_train = c.features.matrix.select_rows(c.split.train_ids);
    ex.data.y_train = labels_of(c, c.split.train_ids);
    ex.data.x_dev = c.features.matrix.select_rows(c.split.dev_ids);
    ex.data.y_dev = labels_of(c, c.split.dev_ids);
    ex.data.num_classes = c.split.num_classes;
    ex.x_test = c.features.matrix.select_rows(c.split.test_ids);
    ex.y_test = labels_of(c, c.split.test_ids);
    return ex;
}

/// Word graph from training statistics only (or, for the citation lift
/// with lift_all_nodes, from the given node features and citations).
inline WordGraph build_graph(const Corpus& c, const GraphOptions& o) {
    switch (o.kind) {
        case GraphKind::pmi:
        case GraphKind::npmi: {
            const auto docs = c.train_token_ids();
            const auto stats = count_windows(docs, c.vocab.size(), o.window_size);
            return build_pmi_graph(stats, o.kind == GraphKind::pmi ? Association::pmi : Association::npmi,
                                   o.threshold);
        }
        case GraphKind::gram: {
            const auto x = apply_weighting(c.counts, o.product_weighting, c.vocab);
            return build_cooccurrence_gram_graph({x.matrix.select_rows(c.split.train_ids), x.weighting}, o.normalize);
        }
        case GraphKind::citation_lifted: {
            if (!c.citation) throw std::invalid_argument("citation lift requires a citation dataset");
            const auto x = apply_weighting(c.counts, o.product_weighting, c.vocab);
            if (o.lift_all_nodes) return build_citation_lifted_graph(x, *c.citation, o.lift_order, o.normalize);
            return build_citation_lifted_graph({x.matrix.select_rows(c.split.train_ids), x.weighting},
                                               induced_subgraph(*c.citation, c.split.train_ids), o.lift_order,
                                               o.normalize);
        }
    }
    throw std::invalid_argument("unknown graph kind");
}

}  // namespace wgcn
