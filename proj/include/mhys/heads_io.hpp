#pragma once

// Plain-text projection-head files:
//
//   #MHYS-HEADS 1
//   dimension <d>
//   <name>.weight <rows> <cols> <rows*cols values, row-major>
//   <name>.bias <size> <values>
//
// for name in sentence_query, sentence_summary, word_query, word_summary.
// Values are written with 17 significant digits so reading restores the
// exact doubles.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mhys/errors.hpp"
#include "mhys/similarity.hpp"

namespace mhys {

inline constexpr const char* kHeadsSentinel = "#MHYS-HEADS";
inline constexpr int kHeadsFormatVersion = 1;

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_affine(std::ostream& out, const std::string& name, const AffineMap& map) {
    out << name << ".weight " << map.weight.rows() << ' ' << map.weight.cols();
    for (Eigen::Index r = 0; r < map.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < map.weight.cols(); ++c) out << ' ' << format_double(map.weight(r, c));
    out << '\n' << name << ".bias " << map.bias.size();
    for (Eigen::Index i = 0; i < map.bias.size(); ++i) out << ' ' << format_double(map.bias[i]);
    out << '\n';
}

inline double parse_double(const std::string& tok, const std::string& source, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(source, line, "not a number: '" + tok + "'");
    }
}

inline long parse_size(const std::string& tok, const std::string& source, std::size_t line) {
    const double v = parse_double(tok, source, line);
    if (v < 0 || v != static_cast<double>(static_cast<long>(v)))
        throw ParseError(source, line, "not a size: '" + tok + "'");
    return static_cast<long>(v);
}

}  // namespace detail

inline void write_heads(std::ostream& out, const ProjectionHeads& heads) {
    out << kHeadsSentinel << ' ' << kHeadsFormatVersion << '\n';
    out << "dimension " << heads.dimension() << '\n';
    detail::write_affine(out, "sentence_query", heads.sentence_query);
    detail::write_affine(out, "sentence_summary", heads.sentence_summary);
    detail::write_affine(out, "word_query", heads.word_query);
    detail::write_affine(out, "word_summary", heads.word_summary);
}

inline ProjectionHeads read_heads(std::istream& in, const std::string& source = "<heads>") {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) throw ParseError(source, line_no + 1, "unexpected end of file");
        ++line_no;
        return std::istringstream(line);
    };

    {
        auto ls = next_line();
        std::string sentinel;
        int version = 0;
        if (!(ls >> sentinel >> version) || sentinel != kHeadsSentinel)
            throw ParseError(source, line_no, "missing " + std::string(kHeadsSentinel) + " header");
        if (version != kHeadsFormatVersion)
            throw ParseError(source, line_no, "unsupported heads format version " + std::to_string(version));
    }
    long dim = 0;
    {
        auto ls = next_line();
        std::string key, value;
        if (!(ls >> key >> value) || key != "dimension")
            throw ParseError(source, line_no, "expected 'dimension <d>'");
        dim = detail::parse_size(value, source, line_no);
    }

    ProjectionHeads heads;
    AffineMap* maps[] = {&heads.sentence_query, &heads.sentence_summary, &heads.word_query, &heads.word_summary};
    const char* names[] = {"sentence_query", "sentence_summary", "word_query", "word_summary"};
    for (int m = 0; m < 4; ++m) {
        {
            auto ls = next_line();
            std::string key, rows_s, cols_s;
            if (!(ls >> key >> rows_s >> cols_s) || key != std::string(names[m]) + ".weight")
                throw ParseError(source, line_no, "expected " + std::string(names[m]) + ".weight");
            const long rows = detail::parse_size(rows_s, source, line_no);
            const long cols = detail::parse_size(cols_s, source, line_no);
            if (rows != dim || cols != dim)
                throw ParseError(source, line_no, "weight shape must be " + std::to_string(dim) + "x" +
                                                      std::to_string(dim));
            maps[m]->weight.resize(rows, cols);
            std::string tok;
            for (long r = 0; r < rows; ++r)
                for (long c = 0; c < cols; ++c) {
                    if (!(ls >> tok)) throw ParseError(source, line_no, "too few weight values");
                    maps[m]->weight(r, c) = detail::parse_double(tok, source, line_no);
                }
            if (ls >> tok) throw ParseError(source, line_no, "too many weight values");
        }
        {
            auto ls = next_line();
            std::string key, size_s;
            if (!(ls >> key >> size_s) || key != std::string(names[m]) + ".bias")
                throw ParseError(source, line_no, "expected " + std::string(names[m]) + ".bias");
            const long size = detail::parse_size(size_s, source, line_no);
            if (size != dim) throw ParseError(source, line_no, "bias size must be " + std::to_string(dim));
            maps[m]->bias.resize(size);
            std::string tok;
            for (long i = 0; i < size; ++i) {
                if (!(ls >> tok)) throw ParseError(source, line_no, "too few bias values");
                maps[m]->bias[i] = detail::parse_double(tok, source, line_no);
            }
            if (ls >> tok) throw ParseError(source, line_no, "too many bias values");
        }
    }
    if (!heads.sentence_query.all_finite() || !heads.sentence_summary.all_finite() ||
        !heads.word_query.all_finite() || !heads.word_summary.all_finite())
        throw ParseError(source, line_no, "non-finite parameter");
    return heads;
}

inline void save_heads(const std::string& path, const ProjectionHeads& heads) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_heads(out, heads);
    if (!out) throw Error("failed writing '" + path + "'");
}

inline ProjectionHeads load_heads(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_heads(in, path);
}

}  // namespace mhys
