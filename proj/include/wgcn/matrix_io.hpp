#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wgcn/io.hpp"
#include "wgcn/sparse_matrix.hpp"

namespace wgcn {

inline constexpr std::string_view kMatrixMagic = "WGCM";
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

// Layout (little-endian): "WGCM", u32 version, u64 rows, u64 cols, u64 nnz,
// u64 row_offsets[rows+1], u64 col_indices[nnz], f64 values[nnz].
inline std::string encode_matrix(const SparseMatrix& m) {
    std::string out;
    out.reserve(4 + 4 + 24 + 8 * (m.rows() + 1) + 16 * m.nnz());
    out.append(kMatrixMagic);
    binio::put<std::uint32_t>(out, kMatrixFormatVersion);
    binio::put<std::uint64_t>(out, m.rows());
    binio::put<std::uint64_t>(out, m.cols());
    binio::put<std::uint64_t>(out, m.nnz());
    for (auto v : m.row_offsets()) binio::put<std::uint64_t>(out, v);
    for (auto v : m.col_indices()) binio::put<std::uint64_t>(out, v);
    for (auto v : m.values()) binio::put<double>(out, v);
    return out;
}

inline SparseMatrix decode_matrix(std::string_view bytes) {
    binio::Reader in(bytes);
    if (in.take(4) != kMatrixMagic) throw FormatError("not a WGCM matrix file (bad magic)");
    const auto version = in.get<std::uint32_t>();
    if (version != kMatrixFormatVersion) throw FormatError("unsupported WGCM version " + std::to_string(version));
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    const auto nnz = in.get<std::uint64_t>();
    if (in.remaining() != 8 * (rows + 1) + 16 * nnz) throw FormatError("WGCM payload size does not match header");
    std::vector<std::size_t> offsets(rows + 1);
    std::vector<std::size_t> indices(nnz);
    std::vector<double> values(nnz);
    for (auto& v : offsets) v = in.get<std::uint64_t>();
    for (auto& v : indices) v = in.get<std::uint64_t>();
    for (auto& v : values) v = in.get<double>();
    try {
        return SparseMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("WGCM matrix violates CSR invariants: ") + e.what());
    }
}

inline void save_matrix(const std::filesystem::path& path, const SparseMatrix& m) {
    write_file_atomic(path, encode_matrix(m));
}

inline SparseMatrix load_matrix(const std::filesystem::path& path) { return decode_matrix(read_file(path)); }

/// MatrixMarket "coordinate real general", 1-based indices.
inline std::string to_matrix_market(const SparseMatrix& m) {
    std::string out = "%%MatrixMarket matrix coordinate real general\n";
    out += std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " + std::to_string(m.nnz()) + "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto idx = m.row_indices(r);
        const auto val = m.row_values(r);
        for (std::size_t k = 0; k < idx.size(); ++k)
            out += std::to_string(r + 1) + " " + std::to_string(idx[k] + 1) + " " + format_double(val[k]) + "\n";
    }
    return out;
}

/// Accepts real/integer/pattern fields and general/symmetric layouts.
inline SparseMatrix from_matrix_market(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) throw FormatError("missing MatrixMarket banner");
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate") throw FormatError("only coordinate matrices are supported");
    const bool pattern = field == "pattern";
    if (!pattern && field != "real" && field != "integer") throw FormatError("unsupported MatrixMarket field " + field);
    const bool symmetric = symmetry == "symmetric";
    if (!symmetric && symmetry != "general") throw FormatError("unsupported MatrixMarket symmetry " + symmetry);

    do {
        if (!std::getline(in, line)) throw FormatError("missing MatrixMarket size line");
    } while (line.empty() || line[0] == '%');
    std::istringstream size_line(line);
    std::size_t rows = 0, cols = 0, entries = 0;
    if (!(size_line >> rows >> cols >> entries)) throw FormatError("bad MatrixMarket size line");

    std::vector<Triplet> t;
    t.reserve(symmetric ? 2 * entries : entries);
    for (std::size_t e = 0; e < entries; ++e) {
        do {
            if (!std::getline(in, line)) throw FormatError("MatrixMarket file has fewer entries than declared");
        } while (line.empty() || line[0] == '%');
        std::istringstream entry(line);
        std::size_t r = 0, c = 0;
        std::string value_text = "1";
        if (!(entry >> r >> c) || (!pattern && !(entry >> value_text))) throw FormatError("bad MatrixMarket entry: " + line);
        if (r == 0 || c == 0 || r > rows || c > cols) throw FormatError("MatrixMarket index out of range: " + line);
        const double v = parse_double(value_text);
        t.push_back({r - 1, c - 1, v});
        if (symmetric && r != c) t.push_back({c - 1, r - 1, v});
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

}  // namespace wgcn
