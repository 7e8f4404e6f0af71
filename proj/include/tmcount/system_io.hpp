// system_io.hpp: JSON system files.
//
//   {"m": int, "n": int, "A": [block...], "B": [block...], "C": [block...], "meta": {...}}
//
// A block is an m x m row-major array of complex numbers, each encoded as [re, im];
// both the nested form [[[re,im],...],...] and a flat list of m*m pairs are read,
// the nested form is written. "meta" is optional and carried through unchanged.

#pragma once

#include "tmcount/operators.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <utility>

namespace tmcount {

using json = nlohmann::json;

struct SystemFile {
    BlockTridiagonalSystem system;
    json meta = json::object();
};

namespace detail {

inline cplx parse_complex(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ParseError(where + ": expected [re, im] pair, got " + v.dump());
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

inline Matrix parse_block(const json& v, Index m, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + ": expected an array");
    // Nested rows: the first element is itself an array of pairs.
    const bool nested = !v.empty() && v[0].is_array() && !v[0].empty() && v[0][0].is_array();
    if (nested) {
        const Index rows = static_cast<Index>(v.size());
        const Index cols = static_cast<Index>(v[0].size());
        Matrix out(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            const json& row = v[static_cast<std::size_t>(i)];
            const std::string wr = where + "[" + std::to_string(i) + "]";
            if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
                throw ParseError(wr + ": ragged block row");
            }
            for (Index j = 0; j < cols; ++j) {
                out(i, j) = parse_complex(row[static_cast<std::size_t>(j)], wr + "[" + std::to_string(j) + "]");
            }
        }
        return out;
    }
    const Index count = static_cast<Index>(v.size());
    // Flat storage: only a perfect square can be a block; keep the shape so that
    // validation can still report an m mismatch.
    Index side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(count))));
    if (side * side != count) throw ParseError(where + ": " + std::to_string(count) + " entries is not a square block");
    (void)m;
    Matrix out(side, side);
    for (Index i = 0; i < count; ++i) {
        out(i / side, i % side) = parse_complex(v[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
    }
    return out;
}

inline std::vector<Matrix> parse_blocks(const json& doc, const char* key, Index m) {
    if (!doc.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
    const json& arr = doc.at(key);
    if (!arr.is_array()) throw ParseError(std::string("field \"") + key + "\": expected an array of blocks");
    std::vector<Matrix> out;
    out.reserve(arr.size());
    for (std::size_t k = 0; k < arr.size(); ++k) {
        out.push_back(parse_block(arr[k], m, std::string(key) + "[" + std::to_string(k) + "]"));
    }
    return out;
}

inline Index parse_positive(const json& doc, const char* key) {
    if (!doc.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
    const json& v = doc.at(key);
    if (!v.is_number_integer()) throw ParseError(std::string("field \"") + key + "\": expected an integer");
    const auto x = v.get<long long>();
    if (x < 1) throw ParseError(std::string("field \"") + key + "\": must be positive");
    return static_cast<Index>(x);
}

inline json block_to_json(const Matrix& x) {
    json rows = json::array();
    for (Index i = 0; i < x.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < x.cols(); ++j) row.push_back(json::array({x(i, j).real(), x(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
    return line;
}

}  // namespace detail

// Schema-level decoding; the result still has to pass validate_system.
inline SystemFile system_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("top level: expected a JSON object");
    const Index m = detail::parse_positive(doc, "m");
    const Index n = detail::parse_positive(doc, "n");
    SystemFile out;
    auto a = detail::parse_blocks(doc, "A", m);
    auto b = detail::parse_blocks(doc, "B", m);
    auto c = detail::parse_blocks(doc, "C", m);
    for (auto [key, blocks] : {std::pair{"A", &a}, std::pair{"B", &b}, std::pair{"C", &c}}) {
        if (static_cast<Index>(blocks->size()) != n) {
            throw ParseError(std::string("field \"") + key + "\": has " + std::to_string(blocks->size()) +
                             " blocks but n = " + std::to_string(n));
        }
    }
    out.system = BlockTridiagonalSystem(m, std::move(a), std::move(b), std::move(c));
    if (doc.contains("meta")) out.meta = doc.at("meta");
    return out;
}

inline json system_to_json(const BlockTridiagonalSystem& sys, const json& meta = json::object()) {
    json doc;
    doc["m"] = sys.m();
    doc["n"] = sys.n();
    for (auto [key, blocks] : {std::pair{"A", &sys.As()}, std::pair{"B", &sys.Bs()}, std::pair{"C", &sys.Cs()}}) {
        json arr = json::array();
        for (const auto& x : *blocks) arr.push_back(detail::block_to_json(x));
        doc[key] = std::move(arr);
    }
    if (!meta.empty()) doc["meta"] = meta;
    return doc;
}

// Parses and validates; ParseError carries the line for syntax errors and the
// field path for schema errors, ValidationError the validation report.
inline SystemFile parse_system(const std::string& text, const ValidationOptions& opt = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    SystemFile f = system_from_json(doc);
    require_valid(f.system, opt);
    return f;
}

inline SystemFile load_system_file(const std::string& path, const ValidationOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_system(ss.str(), opt);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline BlockTridiagonalSystem load_system(const std::string& path, const ValidationOptions& opt = {}) {
    return load_system_file(path, opt).system;
}

inline void save_system(const BlockTridiagonalSystem& sys, const std::string& path, const json& meta = json::object()) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << system_to_json(sys, meta).dump(1) << '\n';
    if (!out) throw Error("write failed: " + path);
}

}  // namespace tmcount
