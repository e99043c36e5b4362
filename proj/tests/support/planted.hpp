#pragma once

// Planted corpora pushed through the real ingest and graph pipeline.

#include <filesystem>
#include <optional>

#include "oracle/oracle.hpp"
#include "support/bridge.hpp"
#include "wgcn/pipeline.hpp"

namespace testing_support {

struct PlantedSetup {
    wgcn::Corpus corpus;
    wgcn::Experiment experiment;
    wgcn::WordGraph graph;
};

inline wgcn::Corpus ingest_planted(const oracle::PlantedCorpus& pc, const wgcn::IngestOptions& io, bool citation) {
    const auto dir = temp_dir("planted");
    const auto files = oracle::write_planted_corpus(pc, dir);
    auto corpus = citation ? wgcn::ingest_citation_dataset(files.nodes, files.edges, io)
                           : wgcn::ingest_text_corpus(files.docs, files.meta, io);
    std::filesystem::remove_all(dir);
    return corpus;
}

inline PlantedSetup planted_setup(const oracle::PlantedCorpusSpec& spec, const wgcn::GraphOptions& go,
                                  std::optional<wgcn::IngestOptions> io = std::nullopt) {
    const bool citation = go.kind == wgcn::GraphKind::citation_lifted;
    const auto opts = io ? *io : citation ? wgcn::citation_ingest_defaults() : wgcn::IngestOptions{};
    PlantedSetup s{ingest_planted(oracle::generate_planted_corpus(spec), opts, citation), {}, {}};
    s.experiment = wgcn::make_experiment(s.corpus);
    s.graph = wgcn::build_graph(s.corpus, go);
    return s;
}

}  // namespace testing_support
