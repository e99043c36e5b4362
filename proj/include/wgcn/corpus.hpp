#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "wgcn/io.hpp"
#include "wgcn/random.hpp"
#include "wgcn/sparse_matrix.hpp"

namespace wgcn {

enum class Weighting { count, tf, tfidf_l1 };

inline std::string_view to_string(Weighting w) {
    switch (w) {
        case Weighting::count: return "count";
        case Weighting::tf: return "tf";
        case Weighting::tfidf_l1: return "tfidf-l1";
    }
    return "?";
}

inline Weighting parse_weighting(std::string_view s) {
    if (s == "count") return Weighting::count;
    if (s == "tf") return Weighting::tf;
    if (s == "tfidf-l1" || s == "tfidf") return Weighting::tfidf_l1;
    throw std::invalid_argument("unknown weighting '" + std::string(s) + "'");
}

/// Token <-> column index map. Document frequencies and total_docs refer to
/// the documents the vocabulary was built from.
struct Vocabulary {
    std::unordered_map<std::string, std::size_t> token_to_id;
    std::vector<std::string> id_to_token;
    std::vector<std::size_t> doc_freq;
    std::size_t total_docs = 0;

    std::size_t size() const noexcept { return id_to_token.size(); }

    std::optional<std::size_t> find(const std::string& token) const {
        const auto it = token_to_id.find(token);
        if (it == token_to_id.end()) return std::nullopt;
        return it->second;
    }

    /// Order-sensitive content hash.
    std::string hash() const {
        std::uint64_t h = fnv1a64(std::to_string(total_docs));
        for (std::size_t i = 0; i < size(); ++i) {
            h = fnv1a64(id_to_token[i], h);
            h = fnv1a64("\t" + std::to_string(doc_freq[i]) + "\n", h);
        }
        return hex64(h);
    }
};

struct CorpusSplit {
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> dev_ids;
    std::vector<std::size_t> test_ids;
    std::vector<std::size_t> labels;  // one per document
    std::size_t num_classes = 0;
    std::vector<std::string> label_names;
};

struct FeatureMatrix {
    SparseMatrix matrix;  // documents x vocabulary
    Weighting weighting = Weighting::count;
};

/// Binary, symmetric, zero-diagonal document adjacency.
struct CitationGraph {
    SparseMatrix adjacency;
};

enum class VocabScope { train, all };

struct IngestOptions {
    /// Minimum document frequency for a token to enter the vocabulary.
    std::size_t min_freq = 5;
    Weighting weighting = Weighting::tfidf_l1;
    /// Fraction of the training split moved to dev when the metadata
    /// declares no dev documents.
    double dev_fraction = 0.1;
    std::uint64_t seed = 0;
    VocabScope vocab_scope = VocabScope::train;
};

/// Defaults for citation datasets: node features are given attributes for
/// every node, so the vocabulary covers all nodes.
inline IngestOptions citation_ingest_defaults() {
    IngestOptions o;
    o.min_freq = 1;
    o.vocab_scope = VocabScope::all;
    return o;
}

struct IngestStats {
    std::size_t empty_docs = 0;  // documents with no in-vocabulary token
    std::size_t oov_tokens = 0;  // token occurrences dropped
    std::size_t carved_dev = 0;
};

struct Corpus {
    std::vector<std::string> doc_ids;
    Vocabulary vocab;
    FeatureMatrix counts;    // raw counts, used for graph statistics
    FeatureMatrix features;  // weighted per IngestOptions::weighting
    CorpusSplit split;
    /// In-vocabulary token ids of each document, in document order.
    std::vector<std::vector<std::size_t>> token_ids;
    /// Token count of each document before vocabulary filtering.
    std::vector<std::size_t> raw_lengths;
    IngestStats stats;
    std::optional<CitationGraph> citation;

    std::vector<std::vector<std::size_t>> train_token_ids() const {
        std::vector<std::vector<std::size_t>> out;
        out.reserve(split.train_ids.size());
        for (auto id : split.train_ids) out.push_back(token_ids[id]);
        return out;
    }
};

/// Lowercases (ASCII) and splits on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

/// Builds the vocabulary from the given documents; token order is first
/// appearance.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   std::span<const std::size_t> source_ids, std::size_t min_freq) {
    std::unordered_map<std::string, std::size_t> df;
    std::vector<std::string> order;
    for (auto id : source_ids) {
        std::unordered_set<std::string_view> seen;
        for (const auto& tok : docs[id]) {
            if (!seen.insert(tok).second) continue;
            auto [it, inserted] = df.try_emplace(tok, 0);
            if (inserted) order.push_back(tok);
            ++it->second;
        }
    }
    Vocabulary v;
    v.total_docs = source_ids.size();
    for (const auto& tok : order) {
        const std::size_t f = df[tok];
        if (f < std::max<std::size_t>(min_freq, 1)) continue;
        v.token_to_id.emplace(tok, v.id_to_token.size());
        v.id_to_token.push_back(tok);
        v.doc_freq.push_back(f);
    }
    return v;
}

/// Count matrix of documents projected onto a fixed vocabulary; unknown
/// tokens are dropped.
inline FeatureMatrix count_features(const std::vector<std::vector<std::string>>& docs, const Vocabulary& vocab,
                                    IngestStats* stats = nullptr,
                                    std::vector<std::vector<std::size_t>>* token_ids = nullptr) {
    std::vector<Triplet> t;
    if (token_ids) token_ids->assign(docs.size(), {});
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::size_t kept = 0;
        for (const auto& tok : docs[d]) {
            const auto id = vocab.find(tok);
            if (!id) {
                if (stats) ++stats->oov_tokens;
                continue;
            }
            t.push_back({d, *id, 1.0});
            if (token_ids) (*token_ids)[d].push_back(*id);
            ++kept;
        }
        if (kept == 0 && stats) ++stats->empty_docs;
    }
    return {SparseMatrix::from_triplets(docs.size(), vocab.size(), std::move(t)), Weighting::count};
}

/// Re-weights a count matrix. idf = ln(total_docs / doc_freq) uses the
/// vocabulary's statistics.
inline FeatureMatrix apply_weighting(const FeatureMatrix& m, Weighting scheme, const Vocabulary& vocab) {
    if (m.weighting != Weighting::count) throw std::invalid_argument("apply_weighting: input must hold raw counts");
    if (m.matrix.cols() != vocab.size()) throw std::invalid_argument("apply_weighting: vocabulary size mismatch");
    if (scheme == Weighting::count) return m;

    const SparseMatrix& x = m.matrix;
    std::vector<double> row_scale(x.rows(), 0.0);
    std::vector<double> idf(vocab.size(), 1.0);
    if (scheme == Weighting::tfidf_l1) {
        for (std::size_t j = 0; j < vocab.size(); ++j)
            idf[j] = std::log(static_cast<double>(vocab.total_docs) / static_cast<double>(vocab.doc_freq[j]));
    }
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double length = 0.0;
        double weighted = 0.0;
        const auto idx = x.row_indices(r);
        const auto val = x.row_values(r);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            length += val[k];
            weighted += val[k] * idf[idx[k]];
        }
        if (scheme == Weighting::tf) {
            row_scale[r] = length > 0.0 ? 1.0 / length : 0.0;
        } else {
            // tf * idf followed by L1 normalization: the 1/length factor cancels.
            row_scale[r] = weighted > 0.0 ? 1.0 / weighted : 0.0;
        }
    }
    return {x.map_values([&](std::size_t r, std::size_t c, double v) { return v * idf[c] * row_scale[r]; }), scheme};
}

namespace detail {

enum class SplitKind { train, dev, test };

inline SplitKind parse_split(std::string_view s) {
    if (s == "train") return SplitKind::train;
    if (s == "dev" || s == "val" || s == "valid" || s == "validation") return SplitKind::dev;
    if (s == "test") return SplitKind::test;
    throw FormatError("unknown split '" + std::string(s) + "'");
}

struct Record {
    std::string id;
    SplitKind split;
    std::string label;
    std::vector<std::string> tokens;
};

/// Shared tail of both ingest paths: labels, splits, vocabulary, features.
inline Corpus assemble(std::vector<Record> records, const IngestOptions& opts) {
    Corpus c;
    std::set<std::string> label_set;
    for (const auto& r : records) label_set.insert(r.label);
    c.split.label_names.assign(label_set.begin(), label_set.end());
    c.split.num_classes = c.split.label_names.size();
    std::map<std::string, std::size_t> label_index;
    for (std::size_t i = 0; i < c.split.label_names.size(); ++i) label_index[c.split.label_names[i]] = i;

    bool has_dev = false;
    std::vector<std::vector<std::string>> docs;
    docs.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        c.doc_ids.push_back(r.id);
        c.split.labels.push_back(label_index.at(r.label));
        c.raw_lengths.push_back(r.tokens.size());
        switch (r.split) {
            case SplitKind::train: c.split.train_ids.push_back(i); break;
            case SplitKind::dev: c.split.dev_ids.push_back(i); has_dev = true; break;
            case SplitKind::test: c.split.test_ids.push_back(i); break;
        }
        docs.push_back(std::move(r.tokens));
    }
    if (c.split.train_ids.empty()) throw std::invalid_argument("corpus has no training documents");

    if (!has_dev && opts.dev_fraction > 0.0) {
        const auto n = c.split.train_ids.size();
        auto carve = static_cast<std::size_t>(std::llround(opts.dev_fraction * static_cast<double>(n)));
        carve = std::min(carve, n - 1);
        if (carve > 0) {
            std::vector<std::size_t> shuffled = c.split.train_ids;
            Rng rng(mix_seed(opts.seed));
            rng.shuffle(std::span<std::size_t>(shuffled));
            c.split.dev_ids.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(carve));
            c.split.train_ids.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(carve), shuffled.end());
            std::sort(c.split.dev_ids.begin(), c.split.dev_ids.end());
            std::sort(c.split.train_ids.begin(), c.split.train_ids.end());
            c.stats.carved_dev = carve;
        }
    }

    std::vector<std::size_t> all_ids(docs.size());
    std::iota(all_ids.begin(), all_ids.end(), std::size_t{0});
    const auto& source = opts.vocab_scope == VocabScope::train ? c.split.train_ids : all_ids;
    c.vocab = build_vocabulary(docs, source, opts.min_freq);
    c.counts = count_features(docs, c.vocab, &c.stats, &c.token_ids);
    c.features = apply_weighting(c.counts, opts.weighting, c.vocab);
    return c;
}

}  // namespace detail

/// Reads a text corpus: one document per line in `docs_path`, and
/// "id<TAB>split<TAB>label" per line in `meta_path`.
inline Corpus ingest_text_corpus(const std::filesystem::path& docs_path, const std::filesystem::path& meta_path,
                                 const IngestOptions& opts = {}) {
    const auto doc_lines = read_lines(docs_path);
    const auto meta_lines = read_lines(meta_path);
    if (doc_lines.size() != meta_lines.size()) {
        throw FormatError("line count mismatch: " + docs_path.string() + " has " + std::to_string(doc_lines.size()) +
                          " lines, " + meta_path.string() + " has " + std::to_string(meta_lines.size()));
    }
    std::vector<detail::Record> records;
    records.reserve(doc_lines.size());
    for (std::size_t i = 0; i < meta_lines.size(); ++i) {
        const auto fields = split(meta_lines[i], '\t');
        if (fields.size() != 3) {
            throw FormatError(meta_path.string() + ":" + std::to_string(i + 1) + ": expected id<TAB>split<TAB>label");
        }
        records.push_back({std::string(fields[0]), detail::parse_split(fields[1]), std::string(fields[2]),
                           tokenize(doc_lines[i])});
    }
    return detail::assemble(std::move(records), opts);
}

/// Reads a citation dataset: nodes as "id<TAB>split<TAB>label<TAB>tokens",
/// edges as "id<TAB>id". Edges are symmetrized, self-edges dropped and
/// duplicates collapsed.
inline Corpus ingest_citation_dataset(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                                      const IngestOptions& opts = citation_ingest_defaults()) {
    const auto node_lines = read_lines(nodes_path);
    std::vector<detail::Record> records;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < node_lines.size(); ++i) {
        const auto fields = split(node_lines[i], '\t');
        if (fields.size() != 3 && fields.size() != 4) {
            throw FormatError(nodes_path.string() + ":" + std::to_string(i + 1) +
                              ": expected id<TAB>split<TAB>label<TAB>tokens");
        }
        std::string id(fields[0]);
        if (!index.emplace(id, records.size()).second) {
            throw FormatError(nodes_path.string() + ":" + std::to_string(i + 1) + ": duplicate node id " + id);
        }
        records.push_back({std::move(id), detail::parse_split(fields[1]), std::string(fields[2]),
                           fields.size() == 4 ? tokenize(fields[3]) : std::vector<std::string>{}});
    }

    std::vector<Triplet> edges;
    const auto edge_lines = read_lines(edges_path);
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
        if (edge_lines[i].empty()) continue;
        const auto fields = split(edge_lines[i], '\t');
        if (fields.size() != 2) throw FormatError(edges_path.string() + ":" + std::to_string(i + 1) + ": expected id<TAB>id");
        const auto a = index.find(std::string(fields[0]));
        const auto b = index.find(std::string(fields[1]));
        if (a == index.end() || b == index.end()) {
            throw FormatError(edges_path.string() + ":" + std::to_string(i + 1) + ": edge references unknown node");
        }
        if (a->second == b->second) continue;
        edges.push_back({a->second, b->second, 1.0});
        edges.push_back({b->second, a->second, 1.0});
    }
    const std::size_t n = records.size();
    auto adjacency = SparseMatrix::from_triplets(n, n, std::move(edges))
                         .map_values([](std::size_t, std::size_t, double) { return 1.0; });

    Corpus c = detail::assemble(std::move(records), opts);
    c.citation = CitationGraph{std::move(adjacency)};
    return c;
}

/// "#total_docs<TAB>n" header, then one "token<TAB>doc_freq" line per id.
inline std::string encode_vocabulary(const Vocabulary& v) {
    std::string out = "#total_docs\t" + std::to_string(v.total_docs) + "\n";
    for (std::size_t i = 0; i < v.size(); ++i) out += v.id_to_token[i] + "\t" + std::to_string(v.doc_freq[i]) + "\n";
    return out;
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0].rfind("#total_docs\t", 0) != 0) throw FormatError(path.string() + ": missing header");
    Vocabulary v;
    v.total_docs = parse_u64(std::string_view(lines[0]).substr(12));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], '\t');
        if (f.size() != 2) throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": expected token<TAB>doc_freq");
        std::string tok(f[0]);
        if (!v.token_to_id.emplace(tok, v.size()).second) throw FormatError(path.string() + ": duplicate token " + tok);
        v.id_to_token.push_back(std::move(tok));
        v.doc_freq.push_back(parse_u64(f[1]));
    }
    return v;
}

struct DatasetSummary {
    std::size_t docs = 0;
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;
    std::size_t words = 0;
    std::size_t classes = 0;
    double average_length = 0.0;
    std::size_t edges = 0;  // undirected citation edges
};

inline DatasetSummary summarize(const Corpus& c) {
    DatasetSummary s;
    s.docs = c.doc_ids.size();
    s.train = c.split.train_ids.size();
    s.dev = c.split.dev_ids.size();
    s.test = c.split.test_ids.size();
    s.words = c.vocab.size();
    s.classes = c.split.num_classes;
    std::size_t total = 0;
    for (auto l : c.raw_lengths) total += l;
    s.average_length = s.docs ? static_cast<double>(total) / static_cast<double>(s.docs) : 0.0;
    if (c.citation) s.edges = c.citation->adjacency.nnz() / 2;
    return s;
}

}  // namespace wgcn
