#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "wgcn/corpus.hpp"
#include "wgcn/io.hpp"
#include "wgcn/matrix_io.hpp"
#include "wgcn/sparse_matrix.hpp"

namespace wgcn {

/// Number of windows containing the unordered pair (i, j), i < j.
struct PairCount {
    std::size_t i;
    std::size_t j;
    std::size_t count;
};

/// Sliding-window co-occurrence counts over a tokenized corpus.
struct CooccurrenceStats {
    std::size_t window_size = 0;
    std::size_t window_count = 0;
    std::vector<std::size_t> unigram_window_counts;
    std::vector<PairCount> pair_window_counts;  // sorted by (i, j), i < j

    std::size_t vocab_size() const noexcept { return unigram_window_counts.size(); }

    std::size_t pair_count(std::size_t a, std::size_t b) const {
        if (a == b) return 0;
        if (a > b) std::swap(a, b);
        const auto it = std::lower_bound(pair_window_counts.begin(), pair_window_counts.end(), std::pair{a, b},
                                         [](const PairCount& p, const std::pair<std::size_t, std::size_t>& key) {
                                             return p.i != key.first ? p.i < key.first : p.j < key.second;
                                         });
        if (it == pair_window_counts.end() || it->i != a || it->j != b) return 0;
        return it->count;
    }
};

/// Every contiguous span of `window_size` tokens is a window; a non-empty
/// document shorter than that is a single window; empty documents
/// contribute none. Each window counts a token, or an unordered pair of
/// distinct tokens, at most once.
inline CooccurrenceStats count_windows(std::span<const std::vector<std::size_t>> docs, std::size_t vocab_size,
                                       std::size_t window_size) {
    if (window_size < 2) throw std::invalid_argument("count_windows: window_size must be at least 2");
    if (docs.empty()) throw std::invalid_argument("count_windows: empty corpus");

    CooccurrenceStats s;
    s.window_size = window_size;
    s.unigram_window_counts.assign(vocab_size, 0);
    std::unordered_map<std::uint64_t, std::size_t> pairs;
    std::vector<std::size_t> window;

    auto visit = [&](std::span<const std::size_t> tokens) {
        window.assign(tokens.begin(), tokens.end());
        std::sort(window.begin(), window.end());
        window.erase(std::unique(window.begin(), window.end()), window.end());
        ++s.window_count;
        for (std::size_t a = 0; a < window.size(); ++a) {
            if (window[a] >= vocab_size) throw std::invalid_argument("count_windows: token id outside vocabulary");
            ++s.unigram_window_counts[window[a]];
            for (std::size_t b = a + 1; b < window.size(); ++b)
                ++pairs[(static_cast<std::uint64_t>(window[a]) << 32U) | window[b]];
        }
    };

    for (const auto& doc : docs) {
        if (doc.empty()) continue;
        if (doc.size() <= window_size) {
            visit(doc);
            continue;
        }
        for (std::size_t start = 0; start + window_size <= doc.size(); ++start)
            visit(std::span<const std::size_t>(doc).subspan(start, window_size));
    }
    if (s.window_count == 0) throw std::invalid_argument("count_windows: corpus has no tokens");

    s.pair_window_counts.reserve(pairs.size());
    for (const auto& [key, count] : pairs)
        s.pair_window_counts.push_back({static_cast<std::size_t>(key >> 32U), static_cast<std::size_t>(key & 0xffffffffU), count});
    std::sort(s.pair_window_counts.begin(), s.pair_window_counts.end(),
              [](const PairCount& a, const PairCount& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    return s;
}

enum class Association { pmi, npmi };

/// PMI(i,j) = ln[p(i,j) / (p(i) p(j))] with p(.) = #W(.)/#W;
/// NPMI = PMI / -ln p(i,j), taken as 1 when p(i,j) = 1.
inline double association_score(const CooccurrenceStats& s, std::size_t pair_windows, std::size_t wi, std::size_t wj,
                                Association variant) {
    const double total = static_cast<double>(s.window_count);
    const double p_ij = static_cast<double>(pair_windows) / total;
    const double p_i = static_cast<double>(wi) / total;
    const double p_j = static_cast<double>(wj) / total;
    const double pmi = std::log(p_ij / (p_i * p_j));
    if (variant == Association::pmi) return pmi;
    if (pair_windows == s.window_count) return 1.0;
    return pmi / -std::log(p_ij);
}

/// Scores of every co-occurring pair, one triplet per unordered pair (i < j).
inline std::vector<Triplet> association_scores(const CooccurrenceStats& s, Association variant) {
    std::vector<Triplet> out;
    out.reserve(s.pair_window_counts.size());
    for (const auto& p : s.pair_window_counts)
        out.push_back({p.i, p.j,
                       association_score(s, p.count, s.unigram_window_counts[p.i], s.unigram_window_counts[p.j],
                                         variant)});
    return out;
}

enum class GraphKind { pmi, npmi, gram, citation_lifted };

inline std::string_view to_string(GraphKind k) {
    switch (k) {
        case GraphKind::pmi: return "pmi";
        case GraphKind::npmi: return "npmi";
        case GraphKind::gram: return "gram";
        case GraphKind::citation_lifted: return "citation";
    }
    return "?";
}

inline GraphKind parse_graph_kind(std::string_view s) {
    if (s == "pmi") return GraphKind::pmi;
    if (s == "npmi") return GraphKind::npmi;
    if (s == "gram") return GraphKind::gram;
    if (s == "citation" || s == "citation_lifted") return GraphKind::citation_lifted;
    throw std::invalid_argument("unknown graph variant '" + std::string(s) + "'");
}

/// Word-word adjacency (vocabulary x vocabulary) and how it was built.
struct WordGraph {
    SparseMatrix adjacency;
    GraphKind kind = GraphKind::npmi;
    bool normalized = true;
    std::size_t window_size = 0;  // pmi / npmi only
    double threshold = 0.0;       // pmi / npmi only
    std::size_t lift_order = 0;   // citation only

    std::size_t vocab_size() const noexcept { return adjacency.rows(); }

    std::string hash() const { return hex64(fnv1a64(encode_matrix(adjacency))); }
};

/// Positive-association graph: an edge wherever the score exceeds
/// `threshold`, then self-loops and symmetric normalization.
inline WordGraph build_pmi_graph(const CooccurrenceStats& stats, Association variant, double threshold) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("build_pmi_graph: threshold must be non-negative");
    std::vector<Triplet> edges;
    for (const auto& t : association_scores(stats, variant)) {
        if (!(t.value > threshold)) continue;
        edges.push_back(t);
        edges.push_back({t.col, t.row, t.value});
    }
    const auto n = stats.vocab_size();
    WordGraph g;
    g.adjacency = normalize_symmetric(SparseMatrix::from_triplets(n, n, std::move(edges)), true);
    g.kind = variant == Association::pmi ? GraphKind::pmi : GraphKind::npmi;
    g.window_size = stats.window_size;
    g.threshold = threshold;
    return g;
}

/// Xᵀ X, before normalization.
inline SparseMatrix cooccurrence_gram(const SparseMatrix& x) { return sp_sp_mm(x.transpose(), x); }

/// Xᵀ Ã^k X with Ã the self-loop normalized citation adjacency, evaluated
/// right to left as k sparse products against X; Ã^k is never formed.
inline SparseMatrix citation_lift(const SparseMatrix& x, const CitationGraph& g, std::size_t k) {
    if (g.adjacency.rows() != x.rows() || !g.adjacency.is_square()) {
        throw std::invalid_argument("citation_lift: citation graph has " + std::to_string(g.adjacency.rows()) +
                                    " nodes but feature matrix has " + std::to_string(x.rows()) + " rows");
    }
    if (k == 0) return cooccurrence_gram(x);
    const SparseMatrix a_norm = normalize_symmetric(g.adjacency, true);
    SparseMatrix chain = x;
    for (std::size_t step = 0; step < k; ++step) chain = sp_sp_mm(a_norm, chain);
    return symmetrize(sp_sp_mm(x.transpose(), chain));
}

inline WordGraph build_cooccurrence_gram_graph(const FeatureMatrix& x, bool normalize = true) {
    WordGraph g;
    const auto gram = cooccurrence_gram(x.matrix);
    g.adjacency = normalize ? normalize_symmetric(gram, true) : gram;
    g.kind = GraphKind::gram;
    g.normalized = normalize;
    return g;
}

inline WordGraph build_citation_lifted_graph(const FeatureMatrix& x, const CitationGraph& cg, std::size_t k,
                                             bool normalize = true) {
    WordGraph g;
    const auto lifted = citation_lift(x.matrix, cg, k);
    g.adjacency = normalize ? normalize_symmetric(lifted, true) : lifted;
    g.kind = GraphKind::citation_lifted;
    g.normalized = normalize;
    g.lift_order = k;
    return g;
}

/// Citation graph restricted to the given nodes, in the given order.
inline CitationGraph induced_subgraph(const CitationGraph& g, std::span<const std::size_t> nodes) {
    const auto rows = g.adjacency.select_rows(nodes);
    return {rows.transpose().select_rows(nodes).transpose()};
}

inline constexpr int kGraphSchemaVersion = 1;

inline nlohmann::json graph_metadata(const WordGraph& g) {
    nlohmann::json j;
    j["schema_version"] = kGraphSchemaVersion;
    j["kind"] = std::string(to_string(g.kind));
    j["normalized"] = g.normalized;
    j["window_size"] = g.window_size;
    j["threshold"] = g.threshold;
    j["lift_order"] = g.lift_order;
    j["vocab_size"] = g.vocab_size();
    j["nnz"] = g.adjacency.nnz();
    j["matrix_hash"] = g.hash();
    return j;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) {
    auto s = p;
    s += ".json";
    return s;
}

/// Writes the adjacency in WGCM format plus a JSON sidecar; `extra` fields
/// are merged into the sidecar.
inline void save_word_graph(const std::filesystem::path& path, const WordGraph& g,
                            const nlohmann::json& extra = nlohmann::json::object()) {
    auto meta = graph_metadata(g);
    for (const auto& [key, value] : extra.items()) meta[key] = value;
    save_matrix(path, g.adjacency);
    write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

inline nlohmann::json load_graph_sidecar(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(sidecar_path(path)));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad graph sidecar " + sidecar_path(path).string() + ": " + e.what());
    }
}

inline WordGraph load_word_graph(const std::filesystem::path& path) {
    const auto meta = load_graph_sidecar(path);
    if (meta.value("schema_version", 0) != kGraphSchemaVersion) throw FormatError("unsupported graph schema version");
    WordGraph g;
    g.adjacency = load_matrix(path);
    g.kind = parse_graph_kind(meta.at("kind").get<std::string>());
    g.normalized = meta.at("normalized").get<bool>();
    g.window_size = meta.at("window_size").get<std::size_t>();
    g.threshold = meta.at("threshold").get<double>();
    g.lift_order = meta.at("lift_order").get<std::size_t>();
    if (meta.at("matrix_hash").get<std::string>() != g.hash()) {
        throw FormatError("graph matrix " + path.string() + " does not match the hash in its sidecar");
    }
    return g;
}

}  // namespace wgcn
