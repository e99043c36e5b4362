#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "wgcn/io.hpp"
#include "wgcn/model.hpp"

namespace wgcn {

inline constexpr std::string_view kCheckpointMagic = "WGCP";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr int kCheckpointSchemaVersion = 1;

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"dropout_rate", c.dropout_rate},
            {"weight_decay", c.weight_decay},
            {"max_epochs", c.max_epochs},
            {"early_stop_patience", c.early_stop_patience},
            {"early_stopping", c.early_stopping},
            {"propagation_order", c.propagation_order},
            {"hidden_dim", c.hidden_dim},
            {"activation", std::string(to_string(c.activation))},
            {"seed", c.seed}};
}

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
inline TrainConfig merge_config(TrainConfig base, const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("training config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "learning_rate") base.learning_rate = value.get<double>();
        else if (key == "dropout_rate") base.dropout_rate = value.get<double>();
        else if (key == "weight_decay") base.weight_decay = value.get<double>();
        else if (key == "max_epochs") base.max_epochs = value.get<std::size_t>();
        else if (key == "early_stop_patience") base.early_stop_patience = value.get<std::size_t>();
        else if (key == "early_stopping") base.early_stopping = value.get<bool>();
        else if (key == "propagation_order") base.propagation_order = value.get<std::size_t>();
        else if (key == "hidden_dim") base.hidden_dim = value.get<std::size_t>();
        else if (key == "activation") base.activation = parse_activation(value.get<std::string>());
        else if (key == "seed") base.seed = value.get<std::uint64_t>();
        else throw FormatError("unknown training config key '" + key + "'");
    }
    return base;
}

namespace detail {

inline void put_dense(std::string& out, const DenseMatrix& m) {
    binio::put<std::uint64_t>(out, m.rows());
    binio::put<std::uint64_t>(out, m.cols());
    for (double v : m.values()) binio::put<double>(out, v);
}

inline DenseMatrix get_dense(binio::Reader& in) {
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    if (in.remaining() < rows * cols * 8) throw FormatError("checkpoint truncated");
    std::vector<double> values(rows * cols);
    for (double& v : values) v = in.get<double>();
    return {rows, cols, std::move(values)};
}

}  // namespace detail

// Layout (little-endian): "WGCP", u32 version, W0 and W1 each as
// u64 rows, u64 cols, f64 values (row-major), then u64 c and f64 b1[c].
inline std::string encode_params(const ModelParams& p) {
    std::string out(kCheckpointMagic);
    binio::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put_dense(out, p.w0);
    detail::put_dense(out, p.w1);
    binio::put<std::uint64_t>(out, p.b1.size());
    for (double v : p.b1) binio::put<double>(out, v);
    return out;
}

inline ModelParams decode_params(std::string_view bytes) {
    binio::Reader in(bytes);
    if (in.take(4) != kCheckpointMagic) throw FormatError("not a checkpoint file (bad magic)");
    if (in.get<std::uint32_t>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
    ModelParams p;
    p.w0 = detail::get_dense(in);
    p.w1 = detail::get_dense(in);
    const auto c = in.get<std::uint64_t>();
    p.b1.resize(c);
    for (double& v : p.b1) v = in.get<double>();
    if (in.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
    try {
        p.check_shapes();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return p;
}

/// Sidecar contents binding a checkpoint to its graph and vocabulary.
struct CheckpointInfo {
    TrainConfig config;
    std::string graph_hash;
    std::string vocab_hash;
    Weighting weighting = Weighting::tfidf_l1;
    std::vector<std::string> label_names;
};

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p, const CheckpointInfo& info) {
    nlohmann::json meta;
    meta["schema_version"] = kCheckpointSchemaVersion;
    meta["config"] = to_json(info.config);
    meta["graph_hash"] = info.graph_hash;
    meta["vocab_hash"] = info.vocab_hash;
    meta["weighting"] = std::string(to_string(info.weighting));
    meta["label_names"] = info.label_names;
    meta["params_hash"] = hex64(fnv1a64(encode_params(p)));
    write_file_atomic(path, encode_params(p));
    auto side = path;
    side += ".json";
    write_file_atomic(side, meta.dump(2) + "\n");
}

inline std::pair<ModelParams, CheckpointInfo> load_checkpoint(const std::filesystem::path& path) {
    auto side = path;
    side += ".json";
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(side));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad checkpoint sidecar " + side.string() + ": " + e.what());
    }
    if (meta.value("schema_version", 0) != kCheckpointSchemaVersion)
        throw FormatError("unsupported checkpoint schema version");
    const std::string bytes = read_file(path);
    if (hex64(fnv1a64(bytes)) != meta.at("params_hash").get<std::string>())
        throw FormatError("checkpoint " + path.string() + " does not match the hash in its sidecar");
    CheckpointInfo info;
    info.config = merge_config(TrainConfig{}, meta.at("config"));
    info.graph_hash = meta.at("graph_hash").get<std::string>();
    info.vocab_hash = meta.at("vocab_hash").get<std::string>();
    info.weighting = parse_weighting(meta.at("weighting").get<std::string>());
    info.label_names = meta.at("label_names").get<std::vector<std::string>>();
    return {decode_params(bytes), info};
}

}  // namespace wgcn
