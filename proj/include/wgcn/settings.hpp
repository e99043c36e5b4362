#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "wgcn/checkpoint.hpp"
#include "wgcn/corpus.hpp"
#include "wgcn/pipeline.hpp"

// Layered run settings: built-in defaults < JSON config file < command-line
// flags. The same JSON layout is embedded in run manifests.
//
//   {
//     "data":   {"docs": ..., "meta": ...}  or  {"nodes": ..., "edges": ...},
//     "ingest": {"min_freq", "weighting", "dev_fraction", "split_seed", "vocab_scope"},
//     "graph":  {"kind", "window_size", "threshold", "lift_order",
//                "product_weighting", "lift_all_nodes", "normalize"},
//     "train":  {TrainConfig keys}
//   }
//
// Every section and key is optional; unknown keys are rejected.

namespace wgcn {

/// Raised when an input's content hash differs from the one recorded for it.
class HashMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetPaths {
    std::filesystem::path docs, meta;    // text corpus
    std::filesystem::path nodes, edges;  // citation dataset

    bool citation() const { return !nodes.empty() || !edges.empty(); }

    void validate() const {
        const bool text = !docs.empty() || !meta.empty();
        if (text && citation()) throw std::invalid_argument("give either --docs/--meta or --nodes/--edges, not both");
        if (text && (docs.empty() || meta.empty())) throw std::invalid_argument("--docs and --meta go together");
        if (citation() && (nodes.empty() || edges.empty())) throw std::invalid_argument("--nodes and --edges go together");
        if (!text && !citation()) throw std::invalid_argument("no dataset given (--docs/--meta or --nodes/--edges)");
    }
};

struct Settings {
    DatasetPaths data;
    IngestOptions ingest;
    GraphOptions graph;
    TrainConfig train;
};

/// Built-in defaults for the dataset layout.
inline Settings default_settings(bool citation) {
    Settings s;
    if (citation) {
        s.ingest = citation_ingest_defaults();
        s.graph.kind = GraphKind::citation_lifted;
        s.train = citation_train_defaults();
    }
    return s;
}

inline std::string_view to_string(VocabScope v) { return v == VocabScope::all ? "all" : "train"; }

inline VocabScope parse_vocab_scope(std::string_view s) {
    if (s == "train") return VocabScope::train;
    if (s == "all") return VocabScope::all;
    throw std::invalid_argument("unknown vocab scope '" + std::string(s) + "'");
}

inline nlohmann::json data_json(const DatasetPaths& d, bool with_hashes) {
    nlohmann::json j = nlohmann::json::object();
    const auto put = [&](const char* key, const std::filesystem::path& p) {
        if (p.empty()) return;
        j[key] = std::filesystem::absolute(p).lexically_normal().string();
        if (with_hashes) j[std::string(key) + "_hash"] = file_hash(p);
    };
    put("docs", d.docs);
    put("meta", d.meta);
    put("nodes", d.nodes);
    put("edges", d.edges);
    return j;
}

inline nlohmann::json to_json(const IngestOptions& o) {
    return {{"min_freq", o.min_freq},
            {"weighting", std::string(to_string(o.weighting))},
            {"dev_fraction", o.dev_fraction},
            {"split_seed", o.seed},
            {"vocab_scope", std::string(to_string(o.vocab_scope))}};
}

inline nlohmann::json to_json(const GraphOptions& o) {
    return {{"kind", std::string(to_string(o.kind))},
            {"window_size", o.window_size},
            {"threshold", o.threshold},
            {"lift_order", o.lift_order},
            {"product_weighting", std::string(to_string(o.product_weighting))},
            {"lift_all_nodes", o.lift_all_nodes},
            {"normalize", o.normalize}};
}

inline nlohmann::json to_json(const Settings& s, bool with_hashes) {
    return {{"data", data_json(s.data, with_hashes)},
            {"ingest", to_json(s.ingest)},
            {"graph", to_json(s.graph)},
            {"train", to_json(s.train)}};
}

namespace detail {

[[noreturn]] inline void unknown_key(std::string_view section, std::string_view key) {
    throw FormatError("unknown key '" + std::string(key) + "' in config section '" + std::string(section) + "'");
}

inline void merge_data(DatasetPaths& d, const nlohmann::json& j) {
    for (const auto& [key, value] : j.items()) {
        if (key == "docs") d.docs = value.get<std::string>();
        else if (key == "meta") d.meta = value.get<std::string>();
        else if (key == "nodes") d.nodes = value.get<std::string>();
        else if (key == "edges") d.edges = value.get<std::string>();
        else if (key.ends_with("_hash")) continue;
        else unknown_key("data", key);
    }
}

inline void merge_ingest(IngestOptions& o, const nlohmann::json& j) {
    for (const auto& [key, value] : j.items()) {
        if (key == "min_freq") o.min_freq = value.get<std::size_t>();
        else if (key == "weighting") o.weighting = parse_weighting(value.get<std::string>());
        else if (key == "dev_fraction") o.dev_fraction = value.get<double>();
        else if (key == "split_seed") o.seed = value.get<std::uint64_t>();
        else if (key == "vocab_scope") o.vocab_scope = parse_vocab_scope(value.get<std::string>());
        else unknown_key("ingest", key);
    }
}

inline void merge_graph(GraphOptions& o, const nlohmann::json& j) {
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") o.kind = parse_graph_kind(value.get<std::string>());
        else if (key == "window_size") o.window_size = value.get<std::size_t>();
        else if (key == "threshold") o.threshold = value.get<double>();
        else if (key == "lift_order") o.lift_order = value.get<std::size_t>();
        else if (key == "product_weighting") o.product_weighting = parse_weighting(value.get<std::string>());
        else if (key == "lift_all_nodes") o.lift_all_nodes = value.get<bool>();
        else if (key == "normalize") o.normalize = value.get<bool>();
        else unknown_key("graph", key);
    }
}

}  // namespace detail

/// Dataset layout named by a config document, if any.
inline std::optional<bool> config_declares_citation(const nlohmann::json& j) {
    if (!j.contains("data")) return std::nullopt;
    DatasetPaths d;
    detail::merge_data(d, j.at("data"));
    if (d.citation()) return true;
    if (!d.docs.empty() || !d.meta.empty()) return false;
    return std::nullopt;
}

/// Overlays a config document onto `s`.
inline void merge_settings(Settings& s, const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            const bool bookkeeping = key == "schema_version" || key == "command" || key == "created" ||
                                     key == "artifacts" || key == "graph_hash" || key == "vocab_hash" ||
                                     key == "graph_file" || key == "options";
            if (bookkeeping) continue;  // manifest fields that are not settings
            if (!value.is_object()) throw FormatError("config section '" + key + "' must be an object");
            if (key == "data") detail::merge_data(s.data, value);
            else if (key == "ingest") detail::merge_ingest(s.ingest, value);
            else if (key == "graph") detail::merge_graph(s.graph, value);
            else if (key == "train") s.train = merge_config(s.train, value);
            else throw FormatError("unknown config section '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config value has the wrong type: ") + e.what());
    }
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Fails when any dataset file recorded in `data` no longer has its hash.
inline void verify_data_hashes(const nlohmann::json& data) {
    for (const auto& key : {"docs", "meta", "nodes", "edges"}) {
        if (!data.contains(key)) continue;
        const auto path = data.at(key).get<std::string>();
        const auto hash_key = std::string(key) + "_hash";
        if (!data.contains(hash_key)) continue;
        const auto actual = file_hash(path);
        if (actual != data.at(hash_key).get<std::string>()) {
            throw HashMismatch("input " + path + " has hash " + actual + " but the manifest records " +
                               data.at(hash_key).get<std::string>());
        }
    }
}

inline Corpus ingest(const Settings& s) {
    s.data.validate();
    return s.data.citation() ? ingest_citation_dataset(s.data.nodes, s.data.edges, s.ingest)
                             : ingest_text_corpus(s.data.docs, s.data.meta, s.ingest);
}

}  // namespace wgcn
